#include "patchnas/backend.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "patchnas/error.hpp"
#include "patchnas/fmap.hpp"

namespace patchnas {

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "synthetic") return BackendKind::kSynthetic;
  if (name == "cache") return BackendKind::kCache;
  if (name == "external") return BackendKind::kExternal;
  throw ConfigError("unknown backend '" + name + "'");
}

void check_backend_contract(std::span<const StageTensor> tensors, const ArchitectureConfig& config,
                            int input_size) {
  const StagePlan plan = validate(config);
  auto violation = [](const std::string& what) {
    throw BackendError("backend contract violation: " + what);
  };
  if (tensors.size() != plan.extracted_stages.size()) {
    violation("expected " + std::to_string(plan.extracted_stages.size()) + " tensors, got " +
              std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const int stage = plan.extracted_stages[i];
    const auto& t = tensors[i];
    if (t.stage != stage) {
      violation("tensor " + std::to_string(i) + " is stage " + std::to_string(t.stage) +
                ", expected " + std::to_string(stage));
    }
    const int c = stage_width(config.width, stage);
    const int r = stage_resolution(input_size, stage);
    if (t.tensor.channels != c || t.tensor.height != r || t.tensor.width != r) {
      violation("stage " + std::to_string(stage) + " shape " + std::to_string(t.tensor.channels) +
                "x" + std::to_string(t.tensor.height) + "x" + std::to_string(t.tensor.width) +
                ", expected " + std::to_string(c) + "x" + std::to_string(r) + "x" +
                std::to_string(r));
    }
    if (t.tensor.values.size() != static_cast<std::size_t>(c) * r * r) {
      violation("stage " + std::to_string(stage) + " payload size");
    }
  }
}

std::vector<StageTensor> encode(FeatureSource& source, const std::string& image_id,
                                const FeatureTensor* image, const ArchitectureConfig& config) {
  auto tensors = source.fetch(image_id, image, config);
  check_backend_contract(tensors, config, source.input_size());
  return tensors;
}

std::vector<StageTensor> SyntheticSource::fetch(const std::string& image_id,
                                                const FeatureTensor* image,
                                                const ArchitectureConfig& config) {
  if (image == nullptr) {
    throw BackendError("feature source unavailable: no pixels for image " + image_id);
  }
  std::shared_ptr<const SyntheticEncoder> encoder;
  {
    std::lock_guard lock(mu_);
    if (!last_ || last_->config() != config) last_ = std::make_shared<SyntheticEncoder>(config);
    encoder = last_;
  }
  if (image->height != input_size_ || image->width != input_size_) {
    throw BackendError("feature source unavailable: image " + image_id + " is not " +
                       std::to_string(input_size_) + "x" + std::to_string(input_size_));
  }
  return encoder->encode(*image);
}

std::vector<StageTensor> CacheSource::fetch(const std::string& image_id, const FeatureTensor*,
                                            const ArchitectureConfig& config) {
  const std::string file = image_id + ".fmap";
  for (const auto& candidate : {root_ / config_key(config) / file, root_ / file}) {
    if (std::filesystem::exists(candidate)) {
      try {
        return read_fmap(candidate);
      } catch (const DataError& e) {
        throw BackendError("feature source unavailable: " + std::string(e.what()));
      }
    }
  }
  throw BackendError("feature source unavailable: no cached features for " + image_id);
}

namespace {

class FdChannel : public Channel {
 public:
  FdChannel(int read_fd, int write_fd, pid_t child = -1)
      : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}
  ~FdChannel() override {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      int status = 0;
      ::waitpid(child_, &status, 0);
    }
  }
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override {
    std::size_t done = 0;
    while (done < bytes.size()) {
      const ssize_t n = send_or_write(write_fd_, bytes.data() + done, bytes.size() - done);
      if (n <= 0) throw BackendError("feature source unavailable: write to exporter failed");
      done += static_cast<std::size_t>(n);
    }
  }

  void read_exact(std::span<std::uint8_t> bytes) override {
    std::size_t done = 0;
    while (done < bytes.size()) {
      const ssize_t n = ::read(read_fd_, bytes.data() + done, bytes.size() - done);
      if (n <= 0) throw BackendError("feature source unavailable: exporter closed the stream");
      done += static_cast<std::size_t>(n);
    }
  }

 private:
  static ssize_t send_or_write(int fd, const std::uint8_t* data, std::size_t n) {
    const ssize_t sent = ::send(fd, data, n, MSG_NOSIGNAL);
    if (sent >= 0 || errno != ENOTSOCK) return sent;
    return ::write(fd, data, n);
  }

  int read_fd_;
  int write_fd_;
  pid_t child_;
};

std::unique_ptr<Channel> connect_tcp(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) throw ConfigError("backend address must be host:port");
  const std::string host = hostport.substr(0, colon);
  const std::string port = hostport.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) {
    throw BackendError("feature source unavailable: cannot resolve " + hostport);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BackendError("feature source unavailable: cannot connect to " + hostport);
  return std::make_unique<FdChannel>(fd, fd);
}

std::unique_ptr<Channel> spawn_process(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw BackendError("feature source unavailable: pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendError("feature source unavailable: pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw BackendError("feature source unavailable: fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  // A dead exporter must surface as a read/write error, not a signal.
  std::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<FdChannel>(from_child[0], to_child[1], pid);
}

}  // namespace

std::unique_ptr<Channel> open_channel(const std::string& address) {
  constexpr std::string_view kExec = "exec:";
  constexpr std::string_view kTcp = "tcp://";
  if (address.starts_with(kExec)) return spawn_process(address.substr(kExec.size()));
  if (address.starts_with(kTcp)) return connect_tcp(address.substr(kTcp.size()));
  return connect_tcp(address);
}

ExternalSource::ExternalSource(std::string address, int input_size)
    : channel_(open_channel(address)), input_size_(input_size) {}

ExternalSource::ExternalSource(std::unique_ptr<Channel> channel, int input_size)
    : channel_(std::move(channel)), input_size_(input_size) {}

std::vector<StageTensor> ExternalSource::fetch(const std::string& image_id, const FeatureTensor*,
                                               const ArchitectureConfig& config) {
  const nlohmann::json request = {{"image_id", image_id}, {"config", config_to_json(config)}};
  const std::string line = request.dump() + "\n";

  std::vector<std::uint8_t> payload;
  {
    std::lock_guard lock(mu_);
    channel_->write_all({reinterpret_cast<const std::uint8_t*>(line.data()), line.size()});
    std::uint8_t header[8];
    channel_->read_exact(header);
    std::uint64_t length = 0;
    for (int i = 7; i >= 0; --i) length = (length << 8) | header[i];
    constexpr std::uint64_t kMaxResponse = 1ULL << 32;
    if (length > kMaxResponse) throw BackendError("backend contract violation: oversized response");
    payload.resize(static_cast<std::size_t>(length));
    channel_->read_exact(payload);
  }

  if (looks_like_fmap(payload)) {
    try {
      return decode_fmap(payload);
    } catch (const DataError& e) {
      throw BackendError("backend contract violation: " + std::string(e.what()));
    }
  }
  const auto reply = nlohmann::json::parse(payload.begin(), payload.end(), nullptr, false);
  if (reply.is_object() && reply.contains("error")) {
    const auto& err = reply["error"];
    const std::string code = err.value("code", "error");
    const std::string message = err.value("message", "");
    throw BackendError("feature source unavailable: exporter error " + code + " for " + image_id +
                       (message.empty() ? "" : ": " + message));
  }
  throw BackendError("backend contract violation: response is neither FMAP nor an error object");
}

std::unique_ptr<FeatureSource> make_source(BackendKind kind, const std::string& address,
                                           int input_size) {
  switch (kind) {
    case BackendKind::kSynthetic:
      return std::make_unique<SyntheticSource>(input_size);
    case BackendKind::kCache:
      if (address.empty()) throw ConfigError("cache backend needs --backend-addr <directory>");
      return std::make_unique<CacheSource>(address, input_size);
    case BackendKind::kExternal:
      if (address.empty()) throw ConfigError("external backend needs --backend-addr");
      return std::make_unique<ExternalSource>(address, input_size);
  }
  throw ConfigError("unknown backend");
}

}  // namespace patchnas
