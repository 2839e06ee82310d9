#ifndef RUBRICRL_BACKEND_HPP_
#define RUBRICRL_BACKEND_HPP_

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rubricrl {

struct Message {
  enum class Role : std::uint8_t { System, User };
  Role role = Role::User;
  std::string content;
  // Local image file sent alongside the text as a data-URL content part.
  std::optional<std::string> image_path;
};

struct BackendRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  std::size_t max_tokens = 1024;
};

struct BackendResponse {
  std::string content;
  std::string finish_reason;
};

// SHA-256 over a canonical JSON rendering of the request (image referenced by
// path, not content). Keys scripted transcripts.
std::string request_digest(const BackendRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendResponse generate(const BackendRequest& request) = 0;
};

// Replays recorded responses keyed by request digest. Transcript files are
// newline-delimited {"digest": ..., "content": ...} objects.
class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}
  static ScriptedBackend from_file(const std::filesystem::path& path);

  void add(const std::string& digest, std::string content) { responses_[digest] = std::move(content); }
  std::size_t size() const { return responses_.size(); }

  // Throws TranscriptMiss for unseen digests.
  BackendResponse generate(const BackendRequest& request) override;

 private:
  std::map<std::string, std::string> responses_;
};

struct TranscriptRecord {
  std::string digest;
  std::string content;
};

std::string to_transcript_line(const TranscriptRecord& record);
void write_transcript(const std::filesystem::path& path, std::span<const TranscriptRecord> records);

// Forwards to another backend and records every exchange, for producing
// transcripts from live runs.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(Backend& inner) : inner_(inner) {}

  BackendResponse generate(const BackendRequest& request) override;
  std::vector<TranscriptRecord> records() const;

 private:
  Backend& inner_;
  mutable std::mutex mu_;
  std::vector<TranscriptRecord> records_;
};

// Backend backed by a plain function; handy for tests and local simulators.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<BackendResponse(const BackendRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  BackendResponse generate(const BackendRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

struct RemoteConfig {
  // Full endpoint URL, e.g. http://localhost:8000/v1/chat/completions.
  std::string url;
  std::string model;
  // Name of the environment variable holding the bearer credential; empty
  // sends no Authorization header.
  std::string api_key_env;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};
  std::size_t max_in_flight = 4;
};

// Chat-completions request body: {"model", "messages", "temperature",
// "max_tokens"}. Messages carrying an image use a content array with a text
// part and an image_url part holding a data URL.
std::string to_wire_body(const BackendRequest& request, const std::string& model);

// Extracts choices[0].message.content (and finish_reason). Throws
// TransportError on a malformed body.
BackendResponse parse_wire_response(const std::string& body);

// One POST per call; connection failures and 408/429/5xx responses are
// retried with exponential backoff up to max_attempts total attempts, then
// TransportError.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  ~RemoteBackend() override;
  RemoteBackend(const RemoteBackend&) = delete;
  RemoteBackend& operator=(const RemoteBackend&) = delete;

  BackendResponse generate(const BackendRequest& request) override;
  const RemoteConfig& config() const { return config_; }

 private:
  struct Endpoint;
  RemoteConfig config_;
  std::unique_ptr<Endpoint> endpoint_;
};

// Issues all requests with at most max_in_flight outstanding; responses are
// returned in request order. The first error is rethrown after all workers
// finish.
std::vector<BackendResponse> generate_all(Backend& backend, std::span<const BackendRequest> requests,
                                          std::size_t max_in_flight = 4);

}  // namespace rubricrl

#endif  // RUBRICRL_BACKEND_HPP_
