#include "fanns/quantization.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include <omp.h>

#include "fanns/distance.h"
#include "fanns/label_filter.h"
#include "fanns/serialize.h"

namespace fanns {

namespace {

constexpr std::size_t kMaxSubCentroids = 256;

int resolve_threads(int threads) {
    return threads > 0 ? threads : omp_get_max_threads();
}

std::size_t row_count(std::span<const float> points, std::size_t dim) {
    if (dim == 0 || points.size() % dim != 0) {
        throw ParameterError("point buffer of " + std::to_string(points.size()) +
                             " floats is not a multiple of dimension " + std::to_string(dim));
    }
    return points.size() / dim;
}

std::uint32_t nearest_centroid(const KMeansModel& model, const float* x, float* best_distance = nullptr) {
    std::uint32_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < model.k(); ++c) {
        const float d = squared_l2(x, model.centroids.data() + c * model.dim, model.dim);
        if (d < best_d) {
            best_d = d;
            best = std::uint32_t(c);
        }
    }
    if (best_distance) {
        *best_distance = best_d;
    }
    return best;
}

std::vector<float> sample_rows(std::span<const float> points, std::size_t dim, std::size_t limit, std::mt19937_64& rng) {
    const std::size_t n = points.size() / dim;
    if (limit == 0 || n <= limit) {
        return {points.begin(), points.end()};
    }
    std::vector<idx_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = 0; i < limit; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(limit);
    std::sort(ids.begin(), ids.end());
    std::vector<float> out;
    out.reserve(limit * dim);
    for (idx_t id : ids) {
        out.insert(out.end(), points.begin() + std::ptrdiff_t(id * dim), points.begin() + std::ptrdiff_t((id + 1) * dim));
    }
    return out;
}

std::vector<float> plus_plus_seeds(std::span<const float> points, std::size_t dim, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.size() / dim;
    std::vector<float> centroids;
    centroids.reserve(k * dim);
    std::vector<bool> chosen(n, false);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());

    auto take = [&](std::size_t i) {
        chosen[i] = true;
        const float* c = points.data() + i * dim;
        centroids.insert(centroids.end(), c, c + dim);
        for (std::size_t j = 0; j < n; ++j) {
            d2[j] = std::min(d2[j], double(squared_l2(points.data() + j * dim, c, dim)));
        }
    };

    take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    while (centroids.size() < k * dim) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t next = n;
        if (total > 0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (std::size_t j = 0; j < n; ++j) {
                if (d2[j] <= 0) {
                    continue;
                }
                next = j;
                r -= d2[j];
                if (r < 0) {
                    break;
                }
            }
        } else {
            // every point coincides with a centroid
            for (std::size_t j = 0; j < n && next == n; ++j) {
                if (!chosen[j]) {
                    next = j;
                }
            }
        }
        take(next);
    }
    return centroids;
}

}  // namespace

std::uint32_t KMeansModel::assign(std::span<const float> x) const {
    if (x.size() != dim) {
        throw ParameterError("point dimension " + std::to_string(x.size()) + " does not match " + std::to_string(dim));
    }
    return nearest_centroid(*this, x.data());
}

void KMeansModel::save(BinaryWriter& out) const {
    out.put<std::uint64_t>(dim);
    out.put_vector(centroids);
}

KMeansModel KMeansModel::load(BinaryReader& in) {
    KMeansModel m;
    m.dim = in.get<std::uint64_t>();
    m.centroids = in.get_vector<float>();
    if (m.dim == 0 || m.centroids.size() % m.dim != 0) {
        in.fail("k-means centroid block does not match its dimension");
    }
    return m;
}

std::vector<std::uint32_t> assign_nearest(const KMeansModel& model, std::span<const float> points, int threads) {
    const std::size_t n = row_count(points, model.dim);
    std::vector<std::uint32_t> out(n);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = nearest_centroid(model, points.data() + i * model.dim);
    }
    return out;
}

std::vector<std::uint32_t> assign_nearest_serial(const KMeansModel& model, std::span<const float> points) {
    const std::size_t n = row_count(points, model.dim);
    std::vector<std::uint32_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = nearest_centroid(model, points.data() + i * model.dim);
    }
    return out;
}

double kmeans_objective(const KMeansModel& model, std::span<const float> points) {
    const std::size_t n = row_count(points, model.dim);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        float d = 0;
        nearest_centroid(model, points.data() + i * model.dim, &d);
        total += d;
    }
    return total;
}

KMeansModel kmeans(std::span<const float> points, std::size_t dim, const KMeansParams& params,
                   std::vector<double>* objective) {
    const std::size_t n = row_count(points, dim);
    const std::size_t k = params.k;
    if (k == 0) {
        throw ParameterError("k-means needs at least one centroid");
    }
    if (k > n) {
        throw ParameterError("k-means with " + std::to_string(k) + " centroids over " + std::to_string(n) + " points");
    }
    std::mt19937_64 rng(params.seed);
    const std::vector<float> train =
            sample_rows(points, dim, params.max_points_per_centroid ? k * params.max_points_per_centroid : 0, rng);
    const std::size_t m = train.size() / dim;

    KMeansModel model;
    model.dim = dim;
    model.centroids = plus_plus_seeds(train, dim, k, rng);

    std::vector<std::uint32_t> previous;
    std::vector<float> dist(m);
    for (int iter = 0; iter < std::max(params.max_iterations, 1); ++iter) {
        std::vector<std::uint32_t> assign(m);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(params.threads))
        for (std::size_t i = 0; i < m; ++i) {
            assign[i] = nearest_centroid(model, train.data() + i * dim, &dist[i]);
        }
        if (objective) {
            objective->push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
        }
        if (assign == previous || iter + 1 == params.max_iterations) {
            break;
        }

        std::vector<double> sums(k * dim, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < m; ++i) {
            ++counts[assign[i]];
            for (std::size_t j = 0; j < dim; ++j) {
                sums[assign[i] * dim + j] += train[i * dim + j];
            }
        }
        std::vector<bool> reseeded(m, false);
        for (std::size_t c = 0; c < k; ++c) {
            float* centroid = model.centroids.data() + c * dim;
            if (counts[c] > 0) {
                for (std::size_t j = 0; j < dim; ++j) {
                    centroid[j] = float(sums[c * dim + j] / double(counts[c]));
                }
                continue;
            }
            std::size_t far = m;
            for (std::size_t i = 0; i < m; ++i) {
                if (!reseeded[i] && (far == m || dist[i] > dist[far])) {
                    far = i;
                }
            }
            reseeded[far] = true;
            std::copy_n(train.data() + far * dim, dim, centroid);
        }
        previous = std::move(assign);
    }
    return model;
}

PQCodebook PQCodebook::train(std::span<const float> points, std::size_t dim, std::size_t m, std::uint64_t seed, int threads) {
    const std::size_t n = row_count(points, dim);
    if (m == 0 || dim / m < 1 || dim % m != 0) {
        throw ParameterError("PQ subspace count " + std::to_string(m) + " must divide dimension " + std::to_string(dim));
    }
    if (n == 0) {
        throw ParameterError("PQ training needs at least one point");
    }
    PQCodebook pq;
    pq.dim_ = dim;
    pq.m_ = m;
    pq.ksub_ = std::min(kMaxSubCentroids, n);
    const std::size_t dsub = dim / m;
    pq.centroids_.assign(m * pq.ksub_ * dsub, 0.0f);

#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
    for (std::size_t s = 0; s < m; ++s) {
        std::vector<float> sub(n * dsub);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(points.data() + i * dim + s * dsub, dsub, sub.data() + i * dsub);
        }
        KMeansParams kp;
        kp.k = pq.ksub_;
        kp.seed = seed + s;
        kp.threads = 1;
        const KMeansModel model = kmeans(sub, dsub, kp);
        std::copy(model.centroids.begin(), model.centroids.end(), pq.centroids_.begin() + std::ptrdiff_t(s * pq.ksub_ * dsub));
    }
    return pq;
}

void PQCodebook::encode(std::span<const float> x, std::uint8_t* code) const {
    const std::size_t ds = dsub();
    for (std::size_t s = 0; s < m_; ++s) {
        const float* xs = x.data() + s * ds;
        const float* table = centroids_.data() + s * ksub_ * ds;
        std::size_t best = 0;
        float best_d = std::numeric_limits<float>::infinity();
        for (std::size_t c = 0; c < ksub_; ++c) {
            const float d = squared_l2(xs, table + c * ds, ds);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        code[s] = std::uint8_t(best);
    }
}

std::vector<std::uint8_t> PQCodebook::encode_batch(std::span<const float> points, int threads) const {
    const std::size_t n = row_count(points, dim_);
    std::vector<std::uint8_t> codes(n * m_);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads))
    for (std::size_t i = 0; i < n; ++i) {
        encode(points.subspan(i * dim_, dim_), codes.data() + i * m_);
    }
    return codes;
}

std::vector<std::uint8_t> PQCodebook::encode_batch_serial(std::span<const float> points) const {
    const std::size_t n = row_count(points, dim_);
    std::vector<std::uint8_t> codes(n * m_);
    for (std::size_t i = 0; i < n; ++i) {
        encode(points.subspan(i * dim_, dim_), codes.data() + i * m_);
    }
    return codes;
}

std::vector<float> PQCodebook::decode(const std::uint8_t* code) const {
    std::vector<float> out;
    out.reserve(dim_);
    for (std::size_t s = 0; s < m_; ++s) {
        const auto c = centroid(s, code[s]);
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

std::vector<float> PQCodebook::distance_table(std::span<const float> query, Metric metric) const {
    if (query.size() != dim_) {
        throw ParameterError("query dimension " + std::to_string(query.size()) + " does not match codebook dimension " +
                             std::to_string(dim_));
    }
    const std::size_t ds = dsub();
    std::vector<float> table(m_ * ksub_);
    for (std::size_t s = 0; s < m_; ++s) {
        for (std::size_t c = 0; c < ksub_; ++c) {
            table[s * ksub_ + c] = distance_unchecked(metric, query.data() + s * ds, centroid(s, c).data(), ds);
        }
    }
    return table;
}

float PQCodebook::adc(std::span<const float> table, const std::uint8_t* code) const {
    float sum = 0.0f;
    for (std::size_t s = 0; s < m_; ++s) {
        sum += table[s * ksub_ + code[s]];
    }
    return sum;
}

void PQCodebook::save(BinaryWriter& out) const {
    out.put<std::uint64_t>(dim_);
    out.put<std::uint64_t>(m_);
    out.put<std::uint64_t>(ksub_);
    out.put_vector(centroids_);
}

PQCodebook PQCodebook::load(BinaryReader& in) {
    PQCodebook pq;
    pq.dim_ = in.get<std::uint64_t>();
    pq.m_ = in.get<std::uint64_t>();
    pq.ksub_ = in.get<std::uint64_t>();
    pq.centroids_ = in.get_vector<float>();
    if (pq.m_ == 0 || pq.dim_ % pq.m_ != 0 || pq.ksub_ > kMaxSubCentroids ||
        pq.centroids_.size() != pq.m_ * pq.ksub_ * pq.dsub()) {
        in.fail("inconsistent PQ codebook block");
    }
    return pq;
}

float adc_distance(const PQCodebook& codebook, std::span<const float> query, const std::uint8_t* code, Metric metric) {
    return codebook.adc(codebook.distance_table(query, metric), code);
}

IvfPqIndex IvfPqIndex::build(const Dataset& data, const IvfPqParams& params, Metric metric) {
    const std::size_t n = data.size();
    const std::size_t dim = data.dim();
    if (params.nlist == 0 || params.nlist > n) {
        throw ParameterError("nlist " + std::to_string(params.nlist) + " must be in [1, " + std::to_string(n) + "]");
    }
    if (params.m == 0 || dim % params.m != 0) {
        throw ParameterError("PQ subspace count " + std::to_string(params.m) + " must divide dimension " +
                             std::to_string(dim));
    }
    IvfPqIndex index;
    index.n_ = n;
    index.metric_ = metric;
    index.residual_ = params.residual;

    KMeansParams kp;
    kp.k = params.nlist;
    kp.max_iterations = 20;
    kp.seed = params.seed;
    kp.threads = params.threads;
    index.coarse_ = kmeans(data.values(), dim, kp);
    const auto assign = assign_nearest(index.coarse_, data.values(), params.threads);
    index.lists_.assign(params.nlist, {});
    for (idx_t id = 0; id < n; ++id) {
        index.lists_[assign[id]].push_back(id);
    }

    std::vector<float> vectors(data.values().begin(), data.values().end());
    if (params.residual) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = index.coarse_.centroid(assign[i]);
            for (std::size_t j = 0; j < dim; ++j) {
                vectors[i * dim + j] -= c[j];
            }
        }
    }
    std::mt19937_64 rng(params.seed ^ 0x9e3779b97f4a7c15ull);
    const auto train = sample_rows(vectors, dim, kMaxSubCentroids * kMaxSubCentroids, rng);
    index.pq_ = PQCodebook::train(train, dim, params.m, params.seed + 1, params.threads);
    index.codes_ = index.pq_.encode_batch(vectors, params.threads);
    return index;
}

std::vector<std::uint32_t> IvfPqIndex::nearest_lists(std::span<const float> query, std::size_t nprobe) const {
    std::vector<Neighbor> order(nlist());
    for (std::size_t l = 0; l < nlist(); ++l) {
        order[l] = {idx_t(l), squared_l2(query.data(), coarse_.centroid(l).data(), coarse_.dim)};
    }
    nprobe = std::min(nprobe, order.size());
    std::partial_sort(order.begin(), order.begin() + std::ptrdiff_t(nprobe), order.end(), closer);
    std::vector<std::uint32_t> out(nprobe);
    for (std::size_t i = 0; i < nprobe; ++i) {
        out[i] = order[i].id;
    }
    return out;
}

void IvfPqIndex::scan(std::span<const float> query, std::span<const std::uint32_t> lists, const FilterBitmap* filter,
                      std::vector<Neighbor>& out) const {
    const std::size_t dim = coarse_.dim;
    std::vector<float> shared;
    if (!residual_ || metric_ == Metric::InnerProduct) {
        shared = pq_.distance_table(query, metric_);
    }
    std::vector<float> shifted(dim);
    for (std::uint32_t l : lists) {
        const auto& ids = lists_[l];
        if (ids.empty()) {
            continue;
        }
        float offset = 0.0f;
        std::span<const float> table = shared;
        std::vector<float> local;
        if (residual_) {
            const auto c = coarse_.centroid(l);
            if (metric_ == Metric::SquaredEuclidean) {
                for (std::size_t j = 0; j < dim; ++j) {
                    shifted[j] = query[j] - c[j];
                }
                local = pq_.distance_table(shifted, metric_);
                table = local;
            } else {
                offset = -inner_product(query.data(), c.data(), dim);
            }
        }
        for (idx_t id : ids) {
            if (filter && !filter->test(id)) {
                continue;
            }
            out.push_back({id, offset + pq_.adc(table, code(id))});
        }
    }
}

void IvfPqIndex::save(BinaryWriter& out) const {
    out.put<std::uint64_t>(n_);
    out.put<std::uint8_t>(std::uint8_t(metric_));
    out.put<std::uint8_t>(residual_ ? 1 : 0);
    coarse_.save(out);
    pq_.save(out);
    out.put<std::uint64_t>(lists_.size());
    for (const auto& l : lists_) {
        out.put_vector(l);
    }
    out.put_vector(codes_);
}

IvfPqIndex IvfPqIndex::load(BinaryReader& in) {
    IvfPqIndex index;
    index.n_ = in.get<std::uint64_t>();
    index.metric_ = Metric(in.get<std::uint8_t>());
    index.residual_ = in.get<std::uint8_t>() != 0;
    index.coarse_ = KMeansModel::load(in);
    index.pq_ = PQCodebook::load(in);
    const auto lists = in.get<std::uint64_t>();
    if (lists != index.coarse_.k()) {
        in.fail("IVF list count does not match the coarse centroid count");
    }
    index.lists_.resize(lists);
    std::size_t total = 0;
    for (auto& l : index.lists_) {
        l = in.get_vector<idx_t>();
        total += l.size();
        for (idx_t id : l) {
            if (id >= index.n_) {
                in.fail("IVF list id out of range");
            }
        }
    }
    index.codes_ = in.get_vector<std::uint8_t>();
    if (total != index.n_ || index.codes_.size() != index.n_ * index.pq_.m()) {
        in.fail("IVF lists or codes do not cover the dataset");
    }
    return index;
}

}  // namespace fanns
