#pragma once

#include "meerkit/error.hpp"
#include "meerkit/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <string>

namespace meerkit::pipeline::detail {

namespace fs = std::filesystem;

/// Exclusive ownership of a workdir for the duration of one command.
class WorkdirLock {
public:
    explicit WorkdirLock(const Workdir& wd) : path_(wd.lock()) {
        std::error_code ec;
        fs::create_directories(wd.root, ec);
        if (ec) throw io_error("cannot create workdir " + wd.root.string() + ": " + ec.message());
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            if (errno == EEXIST)
                throw io_error("workdir " + wd.root.string() + " is locked by another run (remove " + path_.string() +
                               " if no run is active)");
            throw io_error("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        (void)!::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    ~WorkdirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    fs::path path_;
};

}  // namespace meerkit::pipeline::detail
