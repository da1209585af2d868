#include "ffagent/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ffagent/errors.hpp"

namespace ffagent::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs assume a little-endian host");

void write_f32_blob(const std::string& path, const double* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open blob for writing: " + path);
    std::vector<float> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<float>(data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
    if (!out) throw DataError("short write on blob: " + path);
}

std::vector<double> read_f32_blob(const std::string& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("missing blob: " + path);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expected * sizeof(float))
        throw DataError("blob size mismatch for " + path + ": have " + std::to_string(bytes) +
                        " bytes, expected " + std::to_string(expected * sizeof(float)));
    in.seekg(0);
    std::vector<float> buf(expected);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(expected * sizeof(float)));
    if (!in) throw DataError("short read on blob: " + path);
    std::vector<double> out(expected);
    for (std::size_t i = 0; i < expected; ++i) out[i] = static_cast<double>(buf[i]);
    return out;
}

void save_checkpoint(const std::string& manifest_path, const std::string& blob_path,
                     const std::vector<ParamRef>& tensors, const nlohmann::json& header) {
    nlohmann::json manifest;
    manifest["format"] = "ffagent-checkpoint-v1";
    manifest["header"] = header;
    manifest["tensors"] = nlohmann::json::array();
    std::vector<double> flat;
    for (const auto& t : tensors) {
        manifest["tensors"].push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
        flat.insert(flat.end(), t.value, t.value + t.size());
    }
    std::ofstream out(manifest_path);
    if (!out) throw DataError("cannot open manifest for writing: " + manifest_path);
    out << manifest.dump(2) << "\n";
    write_f32_blob(blob_path, flat.data(), flat.size());
}

static nlohmann::json read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("missing checkpoint manifest: " + manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid checkpoint manifest " + manifest_path + ": " + e.what());
    }
    if (manifest.value("format", "") != "ffagent-checkpoint-v1")
        throw DataError("unrecognized checkpoint format in " + manifest_path);
    return manifest;
}

nlohmann::json load_checkpoint(const std::string& manifest_path, const std::string& blob_path,
                               const std::vector<ParamRef>& tensors) {
    nlohmann::json manifest = read_manifest(manifest_path);
    const auto& entries = manifest.at("tensors");
    if (entries.size() != tensors.size())
        throw DataError("checkpoint tensor count mismatch: manifest has " +
                        std::to_string(entries.size()) + ", model expects " +
                        std::to_string(tensors.size()));
    std::size_t total = 0;
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const auto& e = entries[k];
        const ParamRef& t = tensors[k];
        if (e.at("name").get<std::string>() != t.name || e.at("rows").get<std::size_t>() != t.rows ||
            e.at("cols").get<std::size_t>() != t.cols)
            throw DataError("checkpoint tensor mismatch at index " + std::to_string(k) +
                            ": manifest " + e.at("name").get<std::string>() + ", model " + t.name);
        total += t.size();
    }
    std::vector<double> flat = read_f32_blob(blob_path, total);
    std::size_t off = 0;
    for (const auto& t : tensors) {
        std::memcpy(t.value, flat.data() + off, t.size() * sizeof(double));
        off += t.size();
    }
    return manifest["header"];
}

nlohmann::json load_checkpoint_tensors(const std::string& manifest_path,
                                       const std::string& blob_path,
                                       std::map<std::string, Matrix>& tensors) {
    nlohmann::json manifest = read_manifest(manifest_path);
    std::size_t total = 0;
    for (const auto& e : manifest.at("tensors"))
        total += e.at("rows").get<std::size_t>() * e.at("cols").get<std::size_t>();
    std::vector<double> flat = read_f32_blob(blob_path, total);
    std::size_t off = 0;
    for (const auto& e : manifest.at("tensors")) {
        Matrix m(e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>());
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + m.size()), m.data.begin());
        off += m.size();
        tensors[e.at("name").get<std::string>()] = std::move(m);
    }
    return manifest["header"];
}

}  // namespace ffagent::nn
