#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "nl2ltl/error.hpp"
#include "nl2ltl/gateway.hpp"

namespace nl2ltl::gateway {
namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  SplitUrl out;
  out.origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

json post_json(const RemoteConfig& config, const std::string& suffix, const json& body) {
  const auto url = split_url(config.endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config.timeout_seconds, 0);
  client.set_read_timeout(config.timeout_seconds, 0);
  client.set_write_timeout(config.timeout_seconds, 0);

  httplib::Headers headers;
  if (!config.token_env.empty()) {
    if (const char* token = std::getenv(config.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  auto result = client.Post(url.path + suffix, headers, body.dump(), "application/json");
  if (!result) {
    throw Error(Errc::BackendUnavailable,
                config.endpoint + ": " + httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    throw Error(Errc::BackendUnavailable, config.endpoint + suffix + " returned HTTP " +
                                              std::to_string(result->status) + ": " + result->body.substr(0, 200));
  }
  try {
    return json::parse(result->body);
  } catch (const json::exception& e) {
    throw Error(Errc::BackendUnavailable, "malformed response from " + config.endpoint + ": " + e.what());
  }
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {}

std::string RemoteBackend::sample(const PromptContext& prompt) {
  json body = {
      {"model", config_.model},
      {"temperature", config_.temperature},
      {"messages",
       json::array({{{"role", "system"}, {"content", prompt.rules + "\n\n" + prompt.shots}},
                    {{"role", "user"}, {"content", prompt.task_message()}}})},
  };
  const auto reply = post_json(config_, "/chat/completions", body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::BackendUnavailable, "chat completion without content: " + std::string(e.what()));
  }
}

std::string RemoteBackend::describe() const { return "remote(" + config_.endpoint + ", " + config_.model + ")"; }

std::vector<double> RemoteEmbedder::embed(const std::string& text) {
  if (text.empty()) throw Error(Errc::InvalidArgument, "cannot embed empty text");
  const auto reply = post_json(config_, "/embeddings", {{"model", config_.model}, {"input", text}});
  try {
    auto v = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    dimension_ = v.size();
    return v;
  } catch (const json::exception& e) {
    throw Error(Errc::BackendUnavailable, "embedding response without vector: " + std::string(e.what()));
  }
}

std::shared_ptr<ModelBackend> make_backend(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "backend spec needs a kind: " + spec);
  const auto kind = spec.substr(0, colon);
  const auto rest = spec.substr(colon + 1);
  if (kind == "simulated") {
    return std::make_shared<SimulatedBackend>(
        std::make_shared<const SimulatedProfile>(SimulatedProfile::load(rest)));
  }
  if (kind == "remote") {
    RemoteConfig config;
    const auto hash = rest.find('#');
    config.endpoint = rest.substr(0, hash);
    config.model = hash == std::string::npos ? "gpt-4o" : rest.substr(hash + 1);
    config.token_env = "NL2LTL_API_KEY";
    return std::make_shared<RemoteBackend>(std::move(config));
  }
  throw Error(Errc::InvalidArgument, "unknown backend kind '" + kind + "'");
}

}  // namespace nl2ltl::gateway
