#include "rxncond/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace rxncond {

namespace {

void put_u16(std::ostream& os, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b, 2);
}

void put_u32(std::ostream& os, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_tensors(const std::string& path, const std::map<std::string, Tensor>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write("NTF1", 4);
    put_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw std::invalid_argument("tensor name too long: " + name);
        put_u16(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(t.dtype() == Dtype::F32 ? '\x00' : '\x01');
        os.put(static_cast<char>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) put_u32(os, static_cast<uint32_t>(t.dim(i)));
        if (t.dtype() == Dtype::F32) {
            for (float v : t.data<float>()) put_u32(os, std::bit_cast<uint32_t>(v));
        } else {
            for (double v : t.data<double>()) put_u64(os, std::bit_cast<uint64_t>(v));
        }
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

std::map<std::string, Tensor> load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "NTF1")
        throw std::runtime_error("bad checkpoint magic in " + path);
    const uint32_t count = get_u32(is);
    std::map<std::string, Tensor> out;
    for (uint32_t e = 0; e < count; ++e) {
        const uint16_t name_len = get_u16(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const int dtype_byte = is.get();
        const int rank = is.get();
        if (!is || (dtype_byte != 0 && dtype_byte != 1) || rank < 0)
            throw std::runtime_error("corrupt checkpoint entry in " + path);
        std::vector<int> shape(static_cast<size_t>(rank));
        for (int i = 0; i < rank; ++i) shape[static_cast<size_t>(i)] = static_cast<int>(get_u32(is));
        const Dtype dt = dtype_byte == 0 ? Dtype::F32 : Dtype::F64;
        Tensor t = Tensor::zeros(shape, dt);
        if (dt == Dtype::F32) {
            for (float& v : t.data<float>()) v = std::bit_cast<float>(get_u32(is));
        } else {
            for (double& v : t.data<double>()) v = std::bit_cast<double>(get_u64(is));
        }
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

void save_checkpoint(const std::string& path, const ParamStore& store) {
    save_tensors(path, store.entries());
}

void load_checkpoint(const std::string& path, ParamStore& store) {
    auto loaded = load_tensors(path);
    store.entries().clear();
    for (auto& [name, t] : loaded) {
        t.set_requires_grad(true);
        store.entries().emplace(name, std::move(t));
    }
}

}  // namespace rxncond
