#include "rolekit/util/files.hpp"

#include <fstream>
#include <mutex>
#include <random>

#include "rolekit/error.hpp"

namespace rolekit::util {

namespace {

std::string temp_suffix() {
    static std::mutex mutex;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mutex);
    static const char* hex = "0123456789abcdef";
    std::string out = ".tmp-";
    for (int i = 0; i < 8; ++i) {
        out.push_back(hex[rng() % 16]);
    }
    return out;
}

} // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += temp_suffix();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InternalError("cannot write " + tmp.string());
        }
        out << content;
        if (!out.flush()) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw InternalError("cannot write " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace rolekit::util
