#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "patchnas/architecture.hpp"
#include "patchnas/synthetic_encoder.hpp"
#include "patchnas/tensor.hpp"

namespace patchnas {

enum class BackendKind { kSynthetic, kCache, kExternal };

BackendKind parse_backend_kind(const std::string& name);

// Produces extraction-stage tensors for one image under one config.
class FeatureSource {
 public:
  virtual ~FeatureSource() = default;

  // image may be null for sources that look features up by id.
  virtual std::vector<StageTensor> fetch(const std::string& image_id, const FeatureTensor* image,
                                         const ArchitectureConfig& config) = 0;
  // Square input resolution the source's tensors correspond to.
  virtual int input_size() const = 0;
};

// Checks that tensors are exactly the extracted stages of config, with
// Search-space widths and resolutions for input_size. Throws BackendError
// ("backend contract violation").
void check_backend_contract(std::span<const StageTensor> tensors, const ArchitectureConfig& config,
                            int input_size);

// Fetch + contract check.
std::vector<StageTensor> encode(FeatureSource& source, const std::string& image_id,
                                const FeatureTensor* image, const ArchitectureConfig& config);

class SyntheticSource final : public FeatureSource {
 public:
  explicit SyntheticSource(int input_size) : input_size_(input_size) {}

  std::vector<StageTensor> fetch(const std::string& image_id, const FeatureTensor* image,
                                 const ArchitectureConfig& config) override;
  int input_size() const override { return input_size_; }

 private:
  int input_size_;
  std::mutex mu_;
  std::shared_ptr<const SyntheticEncoder> last_;
};

// Reads <root>/<config_key>/<image_id>.fmap, falling back to
// <root>/<image_id>.fmap.
class CacheSource final : public FeatureSource {
 public:
  CacheSource(std::filesystem::path root, int input_size)
      : root_(std::move(root)), input_size_(input_size) {}

  std::vector<StageTensor> fetch(const std::string& image_id, const FeatureTensor* image,
                                 const ArchitectureConfig& config) override;
  int input_size() const override { return input_size_; }

 private:
  std::filesystem::path root_;
  int input_size_;
};

// Byte stream to an exporter: a TCP connection or a child process' stdio.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  virtual void read_exact(std::span<std::uint8_t> bytes) = 0;
};

// "tcp://host:port" or "host:port" connects over TCP; "exec:<command>"
// spawns the command through /bin/sh and talks over its stdin/stdout.
std::unique_ptr<Channel> open_channel(const std::string& address);

// Client side of the exporter protocol. Requests are newline-terminated
// JSON {"image_id", "config"}; each response is a u64 little-endian byte
// count followed by an FMAP blob, or by a JSON object
// {"error": {"code", "message"}} when the exporter refuses.
class ExternalSource final : public FeatureSource {
 public:
  ExternalSource(std::string address, int input_size);
  explicit ExternalSource(std::unique_ptr<Channel> channel, int input_size);

  std::vector<StageTensor> fetch(const std::string& image_id, const FeatureTensor* image,
                                 const ArchitectureConfig& config) override;
  int input_size() const override { return input_size_; }

 private:
  std::mutex mu_;  // one request in flight per connection
  std::unique_ptr<Channel> channel_;
  int input_size_;
};

std::unique_ptr<FeatureSource> make_source(BackendKind kind, const std::string& address,
                                           int input_size);

}  // namespace patchnas
