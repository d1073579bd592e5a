#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "textpsy/util/io.hpp"
#include "textpsy/util/log.hpp"

namespace test {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("textpsy-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
    WarningCapture() {
        previous_ = textpsy::log::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() { textpsy::log::set_warning_sink(previous_); }

    std::vector<std::string> messages;

private:
    textpsy::log::Sink previous_;
};

inline void write(const std::filesystem::path& p, const std::string& s) { textpsy::io::write_file_atomic(p, s); }

}  // namespace test
