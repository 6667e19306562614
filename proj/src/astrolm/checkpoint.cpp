#include "astrolm/checkpoint.hpp"

#include <cstring>

#include "astrolm/error.hpp"
#include "astrolm/io.hpp"

namespace astrolm {

namespace {

constexpr char kMagic[4] = {'A', 'L', 'M', 'C'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

class Reader {
public:
    Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) {
            raise(ErrorCode::parse, path_ + ": truncated checkpoint");
        }
    }
    const std::string& data_;
    const std::string& path_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);

    const std::string config = ckpt.params.config.to_json().dump();
    put_u64(out, config.size());
    out += config;

    const std::string extras = ckpt.extras.dump();
    put_u64(out, extras.size());
    out += extras;

    uint64_t count = 0;
    ckpt.params.for_each_tensor([&](const std::string&, const Matrix&) { ++count; });
    put_u64(out, count);
    ckpt.params.for_each_tensor([&](const std::string& name, const Matrix& m) {
        put_u64(out, name.size());
        out += name;
        put_u64(out, m.rows());
        put_u64(out, m.cols());
        for (std::size_t i = 0; i < m.size(); ++i) put_f64(out, m[i]);
    });

    io::write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string data = io::read_text_file(path);
    Reader r(data, path);

    if (r.bytes(4) != std::string(kMagic, 4)) {
        raise(ErrorCode::parse, path + ": not a checkpoint file");
    }
    const uint32_t version = r.u32();
    if (version != kVersion) {
        raise(ErrorCode::parse,
              path + ": unsupported checkpoint version " + std::to_string(version));
    }

    Checkpoint ckpt;
    const auto config_json = nlohmann::json::parse(r.bytes(r.u64()), nullptr, false);
    if (config_json.is_discarded()) {
        raise(ErrorCode::parse, path + ": malformed config block");
    }
    const ModelConfig config = ModelConfig::from_json(config_json);

    const auto extras = nlohmann::ordered_json::parse(r.bytes(r.u64()), nullptr, false);
    if (extras.is_discarded()) {
        raise(ErrorCode::parse, path + ": malformed extras block");
    }
    ckpt.extras = extras;

    Parameters params = Parameters::zeros(config);
    const uint64_t count = r.u64();
    uint64_t expected = 0;
    params.for_each_tensor([&](const std::string&, const Matrix&) { ++expected; });
    if (count != expected) {
        raise(ErrorCode::parse, path + ": tensor count mismatch");
    }
    for (uint64_t t = 0; t < count; ++t) {
        const std::string name = r.bytes(r.u64());
        const uint64_t rows = r.u64();
        const uint64_t cols = r.u64();
        Matrix* m = params.find_tensor(name);
        if (m == nullptr) {
            raise(ErrorCode::parse, path + ": unknown tensor \"" + name + "\"");
        }
        if (m->rows() != rows || m->cols() != cols) {
            raise(ErrorCode::parse, path + ": tensor \"" + name + "\" has shape " +
                                        std::to_string(rows) + "x" + std::to_string(cols) +
                                        ", expected " + std::to_string(m->rows()) + "x" +
                                        std::to_string(m->cols()));
        }
        for (std::size_t i = 0; i < m->size(); ++i) (*m)[i] = r.f64();
    }
    if (!r.done()) {
        raise(ErrorCode::parse, path + ": trailing bytes after tensor table");
    }
    ckpt.params = std::move(params);
    return ckpt;
}

}  // namespace astrolm
