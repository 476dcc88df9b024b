#include "manifest.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/version.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include "homophily/error.hpp"

namespace homophily::cli {

namespace fs = std::filesystem;

namespace {

class Digest {
public:
    Digest() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("cli", "SHA-256 unavailable");
    }
    ~Digest() { EVP_MD_CTX_free(ctx_); }
    Digest(const Digest&) = delete;
    Digest& operator=(const Digest&) = delete;

    void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_, md, &len);
        std::ostringstream os;
        for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
        return os.str();
    }

private:
    EVP_MD_CTX* ctx_;
};

std::vector<fs::path> files_under(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    Digest d;
    d.update(bytes.data(), bytes.size());
    return d.hex();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cli", "cannot read " + path.string());
    Digest d;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        d.update(buf, std::size_t(in.gcount()));
    }
    return d.hex();
}

nlohmann::json hash_inputs(const std::vector<fs::path>& paths) {
    auto out = nlohmann::json::object();
    for (const auto& p : paths) {
        if (p.empty() || !fs::exists(p)) continue;
        if (fs::is_directory(p))
            for (const auto& f : files_under(p)) out[f.string()] = sha256_file(f);
        else
            out[p.string()] = sha256_file(p);
    }
    return out;
}

void write_manifest(const fs::path& out, const nlohmann::json& config, const std::vector<fs::path>& inputs,
                    const nlohmann::json& seeds) {
    const auto manifest_path = out / "manifest.json";
    auto outputs = nlohmann::json::object();
    for (const auto& f : files_under(out))
        if (f != manifest_path) outputs[fs::relative(f, out).generic_string()] = sha256_file(f);
    nlohmann::json m{{"tool", "homophily"},
                     {"version", HOMOPHILY_VERSION},
                     {"command", config.value("command", "")},
                     {"config", config},
                     {"config_sha256", sha256_hex(config.dump())},
                     {"inputs", hash_inputs(inputs)},
                     {"outputs", outputs},
                     {"seeds", seeds},
                     {"versions",
                      {{"homophily", HOMOPHILY_VERSION},
                       {"compiler", __VERSION__},
                       {"boost", BOOST_LIB_VERSION},
                       {"nlohmann_json",
                        std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                       {"openssl", OPENSSL_VERSION_TEXT}}}};
    std::ofstream(manifest_path) << m.dump(2) << '\n';
}

}  // namespace homophily::cli
