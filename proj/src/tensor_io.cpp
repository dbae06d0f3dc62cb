#include "wavegms/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace wavegms::io {

namespace {

constexpr char kMagic[8] = {'W', 'G', 'M', 'S', 'T', 'E', 'N', '1'};

std::string dtype_name(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32: return "float32";
        case torch::kFloat64: return "float64";
        case torch::kInt64: return "int64";
        case torch::kUInt8: return "uint8";
        default:
            throw std::runtime_error("unsupported tensor dtype in archive: " +
                                     std::string(c10::toString(t)));
    }
}

torch::ScalarType dtype_from_name(const std::string& name) {
    if (name == "float32") return torch::kFloat32;
    if (name == "float64") return torch::kFloat64;
    if (name == "int64") return torch::kInt64;
    if (name == "uint8") return torch::kUInt8;
    throw std::runtime_error("unknown dtype in archive manifest: " + name);
}

}  // namespace

const torch::Tensor* TensorArchive::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void save_named_tensors(const std::string& path, const NamedTensorList& tensors,
                        const nlohmann::json& meta) {
    nlohmann::json manifest;
    manifest["meta"] = meta;
    manifest["tensors"] = nlohmann::json::array();

    std::vector<torch::Tensor> flat;
    flat.reserve(tensors.size());
    uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        auto t = tensor.detach().cpu().contiguous();
        const uint64_t nbytes = t.numel() * t.element_size();
        manifest["tensors"].push_back({{"name", name},
                                       {"dtype", dtype_name(t.scalar_type())},
                                       {"shape", t.sizes().vec()},
                                       {"offset", offset},
                                       {"nbytes", nbytes}});
        offset += nbytes;
        flat.push_back(std::move(t));
    }

    const std::string manifest_str = manifest.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    const uint64_t mlen = manifest_str.size();
    out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out.write(manifest_str.data(), static_cast<std::streamsize>(mlen));
    for (const auto& t : flat) {
        out.write(static_cast<const char*>(t.data_ptr()),
                  static_cast<std::streamsize>(t.numel() * t.element_size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

TensorArchive load_named_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open tensor archive: " + path);
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a tensor archive (bad magic): " + path);
    }
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    if (!in || mlen > (1ull << 30)) {
        throw std::runtime_error("corrupt archive manifest length: " + path);
    }
    std::string manifest_str(mlen, '\0');
    in.read(manifest_str.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw std::runtime_error("truncated archive manifest: " + path);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_str);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt archive manifest in " + path + ": " +
                                 e.what());
    }

    TensorArchive archive;
    archive.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& entry : manifest.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto dtype = dtype_from_name(entry.at("dtype").get<std::string>());
        const auto shape = entry.at("shape").get<std::vector<int64_t>>();
        const auto nbytes = entry.at("nbytes").get<uint64_t>();

        auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
        if (static_cast<uint64_t>(t.numel() * t.element_size()) != nbytes) {
            throw std::runtime_error("archive entry '" + name +
                                     "' has inconsistent shape/nbytes");
        }
        in.read(static_cast<char*>(t.data_ptr()),
                static_cast<std::streamsize>(nbytes));
        if (!in) {
            throw std::runtime_error("truncated tensor data for '" + name +
                                     "' in " + path);
        }
        archive.tensors.emplace_back(name, std::move(t));
    }
    return archive;
}

uint64_t fingerprint_tensors(const NamedTensorList& tensors) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    auto mix = [&h](const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, tensor] : tensors) {
        mix(name.data(), name.size());
        auto t = tensor.detach().cpu().contiguous();
        for (auto s : t.sizes()) mix(&s, sizeof(s));
        mix(t.data_ptr(), t.numel() * t.element_size());
    }
    return h;
}

NamedTensorList named_parameters_of(const torch::nn::Module& module) {
    NamedTensorList out;
    for (const auto& p : module.named_parameters()) {
        out.emplace_back(p.key(), p.value());
    }
    return out;
}

void load_into_module(torch::nn::Module& module, const TensorArchive& archive,
                      const std::string& prefix) {
    std::map<std::string, torch::Tensor> targets;
    for (const auto& p : module.named_parameters()) targets[p.key()] = p.value();
    for (const auto& b : module.named_buffers()) targets[b.key()] = b.value();

    std::ostringstream problems;
    std::map<std::string, torch::Tensor> sources;
    for (const auto& [name, tensor] : archive.tensors) {
        if (name.rfind(prefix, 0) != 0) continue;
        sources[name.substr(prefix.size())] = tensor;
    }

    for (const auto& [name, target] : targets) {
        auto it = sources.find(name);
        if (it == sources.end()) {
            problems << "  missing tensor: " << prefix << name << " (expected "
                     << target.sizes() << ")\n";
            continue;
        }
        if (it->second.sizes() != target.sizes()) {
            problems << "  shape mismatch: " << prefix << name << " archive "
                     << it->second.sizes() << " vs module " << target.sizes()
                     << "\n";
        }
    }
    for (const auto& [name, tensor] : sources) {
        if (targets.find(name) == targets.end()) {
            problems << "  unexpected tensor: " << prefix << name << " "
                     << tensor.sizes() << "\n";
        }
    }
    const std::string report = problems.str();
    if (!report.empty()) {
        throw std::runtime_error("tensor archive does not match module:\n" +
                                 report);
    }

    torch::NoGradGuard no_grad;
    for (auto& [name, target] : targets) {
        target.copy_(sources.at(name).to(target.scalar_type()));
    }
}

}  // namespace wavegms::io
