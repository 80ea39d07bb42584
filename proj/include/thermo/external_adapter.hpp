#pragma once

// Subprocess bridge to an out-of-process detector (e.g. a YOLO model served by
// a Python script). Line protocol over the child's stdin/stdout:
//
//   child  -> READY 1
//   parent -> FRAME <request-id> <width> <height> <absolute-path>
//   child  -> OK <n>            followed by n lines
//             DET <class> <conf> <cx> <cy> <w> <h>   (normalized coordinates)
//          |  ERR <message>

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "thermo/annotations.hpp"
#include "thermo/detection.hpp"
#include "thermo/detectors.hpp"
#include "thermo/error.hpp"
#include "thermo/frame.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

inline constexpr int kAdapterProtocolVersion = 1;

struct AdapterTimeouts {
    std::chrono::milliseconds handshake{10000};
    std::chrono::milliseconds per_frame{2000};
};

/// The adapter answered a request with `ERR`; the process itself is still usable.
class AdapterReportedError : public Error {
public:
    explicit AdapterReportedError(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

/// Parses one response to a FRAME request. `next_line` yields successive lines.
template <class NextLine>
std::vector<Detection> parse_adapter_response(NextLine&& next_line, int frame_w, int frame_h) {
    const std::string head = next_line();
    const auto fields = text::split_ws(head);
    if (!fields.empty() && fields[0] == "ERR") {
        throw AdapterReportedError("external detector error: " +
                                   std::string(text::trim(std::string_view(head).substr(3))));
    }
    if (fields.size() != 2 || fields[0] != "OK") fail_runtime("external detector protocol violation: '" + head + "'");
    const auto n = text::to_int(fields[1]);
    if (!n || *n < 0) fail_runtime("external detector protocol violation: bad count in '" + head + "'");
    std::vector<Detection> out;
    for (long long i = 0; i < *n; ++i) {
        const std::string line = next_line();
        const auto f = text::split_ws(line);
        if (f.size() != 7 || f[0] != "DET") fail_runtime("external detector protocol violation: '" + line + "'");
        const auto conf = text::to_double(f[2]);
        if (!conf || !(*conf >= 0.0 && *conf <= 1.0)) {
            fail_runtime("external detector protocol violation: bad confidence in '" + line + "'");
        }
        NormBBox box;
        try {
            box = parse_yolo_line(std::string(f[1]) + " " + std::string(f[3]) + " " + std::string(f[4]) + " " +
                                  std::string(f[5]) + " " + std::string(f[6]));
        } catch (const Error& e) {
            fail_runtime(std::string("external detector protocol violation: ") + e.what());
        }
        PixelBBox px;
        try {
            px = denormalize(box, frame_w, frame_h);
        } catch (const Error&) {
            continue;  // sub-pixel box, nothing to measure
        }
        out.push_back({px, *conf, box.class_id});
    }
    return out;
}

/// Owns one adapter child process. Requests are serialized: one frame in flight.
class ExternalAdapter {
public:
    explicit ExternalAdapter(const std::string& command, AdapterTimeouts timeouts = {}) : timeouts_(timeouts) {
        int to_child[2], from_child[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM, 0, to_child) != 0 ||
            ::socketpair(AF_UNIX, SOCK_STREAM, 0, from_child) != 0) {
            fail_runtime(std::string("adapter: socketpair failed: ") + std::strerror(errno));
        }
        pid_ = ::fork();
        if (pid_ < 0) fail_runtime(std::string("adapter: fork failed: ") + std::strerror(errno));
        if (pid_ == 0) {
            ::setpgid(0, 0);  // own group, so shutdown also reaches grandchildren of the shell
            ::dup2(to_child[1], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::setpgid(pid_, pid_);
        ::close(to_child[1]);
        ::close(from_child[1]);
        write_fd_ = to_child[0];
        read_fd_ = from_child[0];
        ::shutdown(write_fd_, SHUT_RD);
        ::shutdown(read_fd_, SHUT_WR);

        scratch_dir_ = std::filesystem::temp_directory_path() / ("thermo-adapter-" + std::to_string(::getpid()) + "-" +
                                                                 std::to_string(pid_));
        std::filesystem::create_directories(scratch_dir_);

        try {
            const std::string hello = read_line(timeouts_.handshake);
            const auto f = text::split_ws(hello);
            if (f.size() != 2 || f[0] != "READY" || text::to_int(f[1]) != kAdapterProtocolVersion) {
                fail_runtime("adapter: bad handshake '" + hello + "'");
            }
        } catch (...) {
            shut_down();
            throw;
        }
    }

    ExternalAdapter(const ExternalAdapter&) = delete;
    ExternalAdapter& operator=(const ExternalAdapter&) = delete;

    ~ExternalAdapter() { shut_down(); }

    /// Sends one frame and returns raw (unthresholded) detections in pixel space.
    std::vector<Detection> request(const ThermalFrame& frame) {
        if (broken_) fail_runtime("adapter: unusable after an earlier failure");
        const auto id = next_id_++;
        const auto path = scratch_dir_ / ("frame_" + std::to_string(id) + (frame.channels() == 1 ? ".pgm" : ".ppm"));
        save_frame(path, frame);
        struct Cleanup {
            std::filesystem::path p;
            ~Cleanup() {
                std::error_code ec;
                std::filesystem::remove(p, ec);
            }
        } cleanup{path};
        try {
            send_line("FRAME " + std::to_string(id) + " " + std::to_string(frame.width()) + " " +
                      std::to_string(frame.height()) + " " + std::filesystem::absolute(path).string());
            const auto deadline = std::chrono::steady_clock::now() + timeouts_.per_frame;
            return parse_adapter_response(
                [&] {
                    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now());
                    return read_line(std::max(left, std::chrono::milliseconds(0)));
                },
                frame.width(), frame.height());
        } catch (const AdapterReportedError&) {
            throw;
        } catch (...) {
            broken_ = true;
            throw;
        }
    }

private:
    void send_line(const std::string& line) {
        std::string buf = line + "\n";
        std::size_t off = 0;
        while (off < buf.size()) {
            const auto n = ::send(write_fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                fail_runtime("adapter: exited (write failed: " + std::string(std::strerror(errno)) + ")");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
                std::string line = pending_.substr(0, nl);
                pending_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            const auto left =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) fail_runtime("adapter: response timeout");
            pollfd pfd{read_fd_, POLLIN, 0};
            const int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (r < 0) {
                if (errno == EINTR) continue;
                fail_runtime(std::string("adapter: poll failed: ") + std::strerror(errno));
            }
            if (r == 0) fail_runtime("adapter: response timeout");
            char chunk[4096];
            const auto n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                fail_runtime(std::string("adapter: read failed: ") + std::strerror(errno));
            }
            if (n == 0) fail_runtime("adapter: exited");
            pending_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void shut_down() {
        if (write_fd_ >= 0) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        write_fd_ = read_fd_ = -1;
        if (pid_ > 0) reap();
        pid_ = -1;
        std::error_code ec;
        if (!scratch_dir_.empty()) std::filesystem::remove_all(scratch_dir_, ec);
    }

    void reap() {
        using namespace std::chrono_literals;
        const auto deadline = std::chrono::steady_clock::now() + 500ms;
        int status = 0;
        while (std::chrono::steady_clock::now() < deadline) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
            ::usleep(5000);
        }
        ::kill(-pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
    }

    AdapterTimeouts timeouts_;
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string pending_;
    std::filesystem::path scratch_dir_;
    std::uint64_t next_id_ = 1;
    bool broken_ = false;
};

class ExternalDetector final : public Detector {
public:
    explicit ExternalDetector(DetectorConfig cfg, AdapterTimeouts timeouts = {})
        : cfg_(std::move(cfg)), adapter_((cfg_.validate(), cfg_.external_command), timeouts) {}

    std::vector<Detection> detect(const ThermalFrame& frame) override {
        return finalize_detections(adapter_.request(frame), cfg_);
    }

private:
    DetectorConfig cfg_;
    ExternalAdapter adapter_;
};

inline std::unique_ptr<Detector> make_detector(const DetectorConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case DetectorKind::Blob:
            return std::make_unique<BlobDetector>(cfg);
        case DetectorKind::External:
            return std::make_unique<ExternalDetector>(cfg);
        case DetectorKind::Replay:
            return std::make_unique<ReplayDetector>();
    }
    fail_usage("unknown detector kind");
}

}  // namespace thermo
