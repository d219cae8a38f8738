#include "fanns/serialize.h"

#include <fstream>
#include <iterator>

namespace fanns {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) {
        throw Error("write failed for '" + path.string() + "'");
    }
}

std::vector<std::uint8_t> encode_container(const std::string& metadata, const std::vector<std::uint8_t>& payload) {
    BinaryWriter out;
    out.put_raw(kContainerMagic, sizeof(kContainerMagic));
    out.put<std::uint32_t>(kContainerVersion);
    out.put<std::uint32_t>(std::uint32_t(metadata.size()));
    out.put_raw(metadata.data(), metadata.size());
    out.put<std::uint64_t>(payload.size());
    out.put_raw(payload.data(), payload.size());
    return out.take();
}

Container decode_container(const std::vector<std::uint8_t>& bytes) {
    BinaryReader in(bytes);
    char magic[4];
    in.get_raw(magic, sizeof(magic));
    if (std::memcmp(magic, kContainerMagic, sizeof(magic)) != 0) {
        throw FormatError("not an index container (bad magic)");
    }
    Container c;
    c.version = in.get<std::uint32_t>();
    if (c.version != kContainerVersion) {
        in.fail("unsupported container version " + std::to_string(c.version));
    }
    const auto meta_size = in.get<std::uint32_t>();
    c.metadata.resize(meta_size);
    in.get_raw(c.metadata.data(), meta_size);
    const auto payload_size = in.get<std::uint64_t>();
    if (payload_size != in.remaining()) {
        in.fail("payload length " + std::to_string(payload_size) + " does not match " +
                std::to_string(in.remaining()) + " remaining bytes");
    }
    c.payload.resize(payload_size);
    in.get_raw(c.payload.data(), payload_size);
    return c;
}

void save_dataset(BinaryWriter& out, const Dataset& data) {
    out.put<std::uint64_t>(data.size());
    out.put<std::uint64_t>(data.dim());
    out.put_raw(data.values().data(), data.values().size() * sizeof(float));
    for (const LabelSet& set : data.all_labels()) {
        out.put<std::uint32_t>(std::uint32_t(set.size()));
        out.put_raw(set.labels().data(), set.size() * sizeof(label_t));
    }
}

Dataset load_dataset(BinaryReader& in) {
    const auto n = in.get<std::uint64_t>();
    const auto dim = in.get<std::uint64_t>();
    if (dim != 0 && n > in.remaining() / (dim * sizeof(float))) {
        in.fail("dataset block larger than input");
    }
    std::vector<float> values(n * dim);
    in.get_raw(values.data(), values.size() * sizeof(float));
    std::vector<LabelSet> labels;
    labels.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto count = in.get<std::uint32_t>();
        if (count > in.remaining() / sizeof(label_t)) {
            in.fail("label block larger than input");
        }
        std::vector<label_t> raw(count);
        in.get_raw(raw.data(), count * sizeof(label_t));
        labels.push_back(LabelSet::from_unsorted(std::move(raw)));
    }
    return Dataset(dim, std::move(values), std::move(labels));
}

}  // namespace fanns
