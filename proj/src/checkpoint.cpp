#include "c2f/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <zlib.h>

#include "c2f/error.hpp"

namespace c2f {

namespace {

constexpr char kMagic[4] = {'C', '2', 'F', '1'};

template <class T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::string_view in, std::size_t at) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

std::string tensor_bytes(const Tensor& t) {
    std::string out;
    out.reserve(t.numel() * 4);
    for (float f : t.data()) put_le(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

std::uint64_t parse_u64(std::string_view s, std::string_view what, int base = 10) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw CheckpointError(fmt::format("malformed {} '{}' in checkpoint header", what, s));
    }
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    for (;;) {
        const auto p = s.find(sep);
        parts.push_back(s.substr(0, p));
        if (p == std::string_view::npos) break;
        s = s.substr(p + 1);
    }
    return parts;
}

}  // namespace

void Checkpoint::set(std::string key, std::string value) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
        throw CheckpointError("checkpoint metadata must not contain newlines or '=' in keys: " + key);
    }
    for (auto& kv : meta) {
        if (kv.first == key) {
            kv.second = std::move(value);
            return;
        }
    }
    meta.emplace_back(std::move(key), std::move(value));
}

bool Checkpoint::has(std::string_view key) const {
    for (const auto& kv : meta) {
        if (kv.first == key) return true;
    }
    return false;
}

const std::string& Checkpoint::get(std::string_view key) const {
    for (const auto& kv : meta) {
        if (kv.first == key) return kv.second;
    }
    throw CheckpointError("checkpoint is missing field '" + std::string(key) + "'");
}

const Tensor& Checkpoint::tensor(std::string_view name) const {
    for (const auto& nt : tensors) {
        if (nt.first == name) return nt.second;
    }
    throw CheckpointError("checkpoint is missing tensor '" + std::string(name) + "'");
}

std::string encode_checkpoint(const Checkpoint& ck) {
    std::string header, payload;
    for (const auto& [k, v] : ck.meta) {
        if (k == "tensor") throw CheckpointError("'tensor' is a reserved checkpoint key");
        header += k + "=" + v + "\n";
    }
    for (const auto& [name, t] : ck.tensors) {
        if (name.find_first_of("|\n") != std::string::npos) throw CheckpointError("bad tensor name: " + name);
        const std::string bytes = tensor_bytes(t);
        std::string dims;
        for (std::size_t i = 0; i < t.rank(); ++i) dims += (i ? "x" : "") + std::to_string(t.dim(i));
        header += fmt::format("tensor={}|{}|{}|{:08x}\n", name, dims, payload.size(), crc32_of(bytes));
        payload += bytes;
    }
    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, header.size());
    out += header;
    out += payload;
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint file (bad magic)");
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError(fmt::format("unsupported checkpoint version {} (expected {})", version, kCheckpointVersion));
    }
    const auto header_len = get_le<std::uint64_t>(bytes, 8);
    if (header_len > bytes.size() - 16) throw CheckpointError("truncated checkpoint header");
    const std::string_view header = bytes.substr(16, header_len);
    const std::string_view payload = bytes.substr(16 + header_len);

    Checkpoint ck;
    std::size_t expected_offset = 0;
    for (std::string_view line : split(header, '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw CheckpointError("malformed checkpoint header line");
        const std::string_view key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key != "tensor") {
            ck.meta.emplace_back(std::string(key), std::string(value));
            continue;
        }
        const auto fields = split(value, '|');
        if (fields.size() != 4) throw CheckpointError("malformed tensor entry in checkpoint header");
        Shape shape;
        for (auto d : split(fields[1], 'x')) shape.push_back(parse_u64(d, "dimension"));
        const std::uint64_t offset = parse_u64(fields[2], "offset");
        const auto crc = static_cast<std::uint32_t>(parse_u64(fields[3], "checksum", 16));
        const std::size_t count = shape_numel(shape);
        if (offset != expected_offset) throw CheckpointError("tensor offsets are not contiguous");
        if (count == 0 || offset + count * 4 > payload.size()) throw CheckpointError("truncated checkpoint payload");
        const std::string_view raw = payload.substr(offset, count * 4);
        if (crc32_of(raw) != crc) {
            throw CheckpointError(fmt::format("checksum mismatch for tensor '{}'", fields[0]));
        }
        std::vector<float> values(count);
        for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_le<std::uint32_t>(raw, i * 4));
        ck.tensors.emplace_back(std::string(fields[0]), Tensor(std::move(shape), std::move(values)));
        expected_offset += count * 4;
    }
    if (expected_offset != payload.size()) throw CheckpointError("checkpoint payload has trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    const std::string bytes = encode_checkpoint(ck);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace c2f
