#include "csdis/dump.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csdis/errors.hpp"
#include "csdis/hash.hpp"

namespace csdis {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'T', 'D'};
constexpr std::size_t kFixedHeader = 10;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        value |= static_cast<U>(bytes[offset + i]) << (8 * i);
    return value;
}

std::size_t element_size(DType dtype) { return dtype == DType::Float32 ? 4 : 8; }

} // namespace

std::vector<std::uint8_t> encode_dump(const Tensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(kFixedHeader + 8 * t.rank() + element_size(t.dtype()) * t.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_le<std::uint32_t>(out, kDumpVersion);
    out.push_back(static_cast<std::uint8_t>(t.dtype()));
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) {
        if (t.dtype() == DType::Float32)
            put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else
            put_le(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Tensor decode_dump(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(0, "bad magic, expected \"CSTD\"");
    if (bytes.size() < 8) throw FormatError(bytes.size(), "truncated header (version)");
    if (auto v = get_le<std::uint32_t>(bytes, 4); v != kDumpVersion)
        throw FormatError(4, "unsupported format version " + std::to_string(v));
    if (bytes.size() < kFixedHeader) throw FormatError(bytes.size(), "truncated header");
    const auto code = bytes[8];
    if (code != 1 && code != 2) throw FormatError(8, "unknown dtype code " + std::to_string(code));
    const auto dtype = static_cast<DType>(code);
    const std::size_t rank = bytes[9];
    if (rank == 0) throw FormatError(9, "rank must be >= 1");

    std::size_t offset = kFixedHeader;
    if (bytes.size() < offset + 8 * rank)
        throw FormatError(bytes.size(), "truncated header (dimension sizes)");
    Shape shape(rank);
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < rank; ++i, offset += 8) {
        const auto d = get_le<std::uint64_t>(bytes, offset);
        if (d == 0) throw FormatError(offset, "zero dimension size");
        if (count > (std::uint64_t{1} << 48) / d) throw FormatError(offset, "dimension product overflows");
        count *= d;
        shape[i] = static_cast<std::size_t>(d);
    }

    const auto esize = element_size(dtype);
    const auto expected_end = offset + count * esize;
    if (bytes.size() < expected_end)
        throw FormatError(bytes.size(), "truncated payload: declared " + std::to_string(count) +
                                            " elements, file holds " +
                                            std::to_string((bytes.size() - offset) / esize));
    if (bytes.size() > expected_end)
        throw FormatError(expected_end, "trailing bytes after payload");

    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i, offset += esize) {
        data[i] = dtype == DType::Float32
                      ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset)))
                      : std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
        if (!std::isfinite(data[i])) throw FormatError(offset, "non-finite payload value");
    }
    return Tensor(std::move(shape), std::move(data), dtype);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_dump(const std::filesystem::path& path, const Tensor& t) {
    const auto bytes = encode_dump(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("write failed for " + path.string());
}

Tensor read_dump(const std::filesystem::path& path) { return decode_dump(read_file_bytes(path)); }

namespace {

constexpr Role kRoleOrder[] = {Role::Images, Role::Contents, Role::Styles, Role::Factors};

std::string member_file(Role role) { return std::string(to_string(role)) + ".cstd"; }

std::string manifest_text(const SampleSet& set) {
    nlohmann::ordered_json manifest;
    manifest["format"] = "CSTD-SampleSet";
    manifest["version"] = kDumpVersion;
    manifest["n"] = set.n();
    manifest["members"] = nlohmann::ordered_json::array();
    for (auto role : kRoleOrder)
        if (set.get(role)) manifest["members"].push_back({{"role", to_string(role)}, {"file", member_file(role)}});
    return manifest.dump(2) + "\n";
}

} // namespace

void write_dump(const std::filesystem::path& dir, const SampleSet& set) {
    std::filesystem::create_directories(dir);
    for (auto role : kRoleOrder)
        if (const auto& t = set.get(role)) write_dump(dir / member_file(role), *t);
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest_text(set);
    if (!out) throw ConfigError("write failed for " + (dir / "manifest.json").string());
}

std::string sample_set_digest(const SampleSet& set) {
    Fnv1a64 h;
    h.update(manifest_text(set));
    for (auto role : kRoleOrder)
        if (const auto& t = set.get(role)) h.update(encode_dump(*t));
    return h.hex();
}

namespace {

nlohmann::json read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("missing manifest.json in " + dir.string());
    try {
        auto manifest = nlohmann::json::parse(in);
        if (!manifest.contains("members") || !manifest["members"].is_array())
            throw ConfigError("manifest.json has no members array");
        return manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest.json: " + std::string(e.what()));
    }
}

} // namespace

SampleSet read_sample_set(const std::filesystem::path& dir) {
    const auto manifest = read_manifest(dir);
    std::optional<Tensor> roles[4];
    for (const auto& m : manifest["members"]) {
        const auto role = role_from_string(m.at("role").get<std::string>());
        roles[static_cast<int>(role)] = read_dump(dir / m.at("file").get<std::string>());
    }
    return SampleSet(std::move(roles[0]), std::move(roles[1]), std::move(roles[2]), std::move(roles[3]));
}

std::string sample_set_digest(const std::filesystem::path& dir) {
    const auto manifest = read_manifest(dir);
    Fnv1a64 h;
    h.update(read_file_bytes(dir / "manifest.json"));
    for (const auto& m : manifest["members"]) h.update(read_file_bytes(dir / m.at("file").get<std::string>()));
    return h.hex();
}

} // namespace csdis
