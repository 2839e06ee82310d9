#include "rubricrl/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <thread>

#include "rubricrl/errors.hpp"
#include "rubricrl/io.hpp"

namespace rubricrl {

namespace {

using nlohmann::ordered_json;

const char* role_name(Message::Role role) { return role == Message::Role::System ? "system" : "user"; }

std::string mime_type(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

bool retriable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string request_digest(const BackendRequest& request) {
  ordered_json obj;
  obj["messages"] = ordered_json::array();
  for (const auto& m : request.messages) {
    ordered_json msg;
    msg["role"] = role_name(m.role);
    msg["content"] = m.content;
    if (m.image_path) msg["image"] = *m.image_path;
    obj["messages"].push_back(std::move(msg));
  }
  obj["temperature"] = request.temperature;
  obj["max_tokens"] = request.max_tokens;
  return sha256_hex(obj.dump());
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open transcript " + path.string());
  ScriptedBackend backend;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      backend.add(obj.at("digest").get<std::string>(), obj.at("content").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(number, std::string("transcript record: ") + e.what());
    }
  }
  return backend;
}

BackendResponse ScriptedBackend::generate(const BackendRequest& request) {
  const auto digest = request_digest(request);
  const auto it = responses_.find(digest);
  if (it == responses_.end()) throw TranscriptMiss("no recorded response for request digest " + digest);
  return {it->second, "stop"};
}

std::string to_transcript_line(const TranscriptRecord& record) {
  ordered_json obj;
  obj["digest"] = record.digest;
  obj["content"] = record.content;
  return obj.dump();
}

void write_transcript(const std::filesystem::path& path, std::span<const TranscriptRecord> records) {
  std::string out;
  for (const auto& r : records) out += to_transcript_line(r) + '\n';
  atomic_write(path, out);
}

BackendResponse RecordingBackend::generate(const BackendRequest& request) {
  auto response = inner_.generate(request);
  std::lock_guard lock(mu_);
  records_.push_back({request_digest(request), response.content});
  return response;
}

std::vector<TranscriptRecord> RecordingBackend::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::string to_wire_body(const BackendRequest& request, const std::string& model) {
  ordered_json body;
  if (!model.empty()) body["model"] = model;
  body["messages"] = ordered_json::array();
  for (const auto& m : request.messages) {
    ordered_json msg;
    msg["role"] = role_name(m.role);
    if (m.image_path) {
      const std::filesystem::path image(*m.image_path);
      const std::string url = "data:" + mime_type(image) + ";base64," + base64_encode(read_file(image));
      msg["content"] = ordered_json::array({
          ordered_json{{"type", "text"}, {"text", m.content}},
          ordered_json{{"type", "image_url"}, {"image_url", ordered_json{{"url", url}}}},
      });
    } else {
      msg["content"] = m.content;
    }
    body["messages"].push_back(std::move(msg));
  }
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  return body.dump();
}

BackendResponse parse_wire_response(const std::string& body) {
  try {
    const auto obj = nlohmann::json::parse(body);
    const auto& choice = obj.at("choices").at(0);
    BackendResponse r;
    r.content = choice.at("message").at("content").get<std::string>();
    if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) r.finish_reason = *it;
    if (r.content.empty()) throw TransportError("endpoint returned empty content");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed chat-completions response: ") + e.what());
  }
}

struct RemoteBackend::Endpoint {
  std::string scheme_host_port;
  std::string path;
};

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)), endpoint_(std::make_unique<Endpoint>()) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.url, m, kUrl)) throw InvalidArgument("endpoint URL must be http(s)://host[:port]/path");
  endpoint_->scheme_host_port = m[1].str();
  endpoint_->path = m[2].matched ? m[2].str() : "/";
  if (config_.max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");
}

RemoteBackend::~RemoteBackend() = default;

BackendResponse RemoteBackend::generate(const BackendRequest& request) {
  if (!(request.temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key) throw TransportError("credential variable " + config_.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = to_wire_body(request, config_.model);

  auto delay = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    httplib::Client client(endpoint_->scheme_host_port);
    client.set_connection_timeout(config_.connect_timeout);
    client.set_read_timeout(config_.read_timeout);
    auto res = client.Post(endpoint_->path, headers, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return parse_wire_response(res->body);
    if (res) {
      last_error = "HTTP " + std::to_string(res->status);
      if (!retriable_status(res->status)) break;
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * config_.backoff_factor));
    }
  }
  throw TransportError("request to " + config_.url + " failed: " + last_error);
}

std::vector<BackendResponse> generate_all(Backend& backend, std::span<const BackendRequest> requests,
                                          std::size_t max_in_flight) {
  std::vector<BackendResponse> out(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        out[i] = backend.generate(requests[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, requests.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace rubricrl
