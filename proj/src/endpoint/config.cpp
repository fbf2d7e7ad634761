#include "httptpc/endpoint/config.hpp"

#include <fstream>
#include <set>

#include "httptpc/core/error.hpp"
#include "httptpc/core/url.hpp"

namespace httptpc::endpoint {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw TpcException(ErrorKind::kBadRequest, "config: " + field + " " + what);
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  if (!obj.is_object()) config_error(where.empty() ? "document" : where, "must be a JSON object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) config_error(where.empty() ? key : where + "." + key, "is not a known field");
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  const std::string field = where.empty() ? key : where + "." + key;
  try {
    if constexpr (std::is_same_v<T, std::uint16_t>) {
      const auto v = it->get<std::int64_t>();
      if (v < 0 || v > 65535) config_error(field, "must be within 0..65535");
      out = static_cast<std::uint16_t>(v);
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      out = it->get<std::string>();
    } else {
      out = it->get<T>();
    }
  } catch (const json::exception&) {
    config_error(field, "has the wrong type");
  }
}

json client_to_json(const token::ClientRegistration& c) {
  json scopes = json::array();
  for (const auto& s : c.grants) scopes.push_back(s.str());
  return {{"client_id", c.client_id}, {"secret", c.secret}, {"cert_subjects", c.cert_subjects},
          {"scopes", scopes}};
}

}  // namespace

bool FaultConfig::any() const noexcept {
  return head_error_rate > 0 || get_error_rate > 0 || serve_rate_bytes_per_sec > 0 ||
         stall_after_bytes.has_value() || no_range_support;
}

void validate(const EndpointConfig& c) {
  if (c.pull_streams < 1) config_error("pull_streams", "must be >= 1 (got " + std::to_string(c.pull_streams) + ")");
  if (!(c.marker_period > 0)) config_error("marker_period", "must be > 0");
  if (c.max_active_copies < 1) {
    config_error("max_active_copies", "must be >= 1 (got " + std::to_string(c.max_active_copies) + ")");
  }
  if (!(c.remote_timeout > 0)) config_error("remote_timeout", "must be > 0");
  if (c.min_stripe_bytes < 1) config_error("min_stripe_bytes", "must be >= 1");
  if (c.token_root_key.empty()) config_error("token_root_key", "must not be empty");
  if (c.listen_host.empty()) config_error("listen_host", "must not be empty");
  if (!c.base_url.empty()) {
    try {
      if (Url::parse(c.base_url).scheme != "https") config_error("base_url", "must be an https URL");
    } catch (const TpcException& e) {
      if (std::string(e.what()).find("config:") != std::string::npos) throw;
      config_error("base_url", "is not a valid URL");
    }
  }
  for (std::size_t i = 0; i < c.redirect_pool.size(); ++i) {
    try {
      if (Url::parse(c.redirect_pool[i]).scheme != "https") throw TpcException(ErrorKind::kBadRequest, "");
    } catch (const TpcException&) {
      config_error("redirect_pool[" + std::to_string(i) + "]", "must be an https URL");
    }
  }
  if (c.store.backend == store::Backend::kDirectory && c.store.root.empty()) {
    config_error("store.root", "is required for the directory backend");
  }
  const auto& ts = c.token_service;
  if (ts.default_lifetime < 1) config_error("token_service.default_lifetime", "must be >= 1");
  if (ts.max_lifetime < ts.default_lifetime) {
    config_error("token_service.max_lifetime", "must be >= token_service.default_lifetime");
  }
  if (ts.key_id.empty()) config_error("token_service.key_id", "must not be empty");
  for (const auto* rate : {&c.faults.head_error_rate, &c.faults.get_error_rate}) {
    if (*rate < 0 || *rate > 1) {
      config_error(rate == &c.faults.head_error_rate ? "faults.head_error_rate" : "faults.get_error_rate",
                   "must be within [0, 1]");
    }
  }
  if (c.faults.serve_rate_bytes_per_sec < 0) config_error("faults.serve_rate_bytes_per_sec", "must be >= 0");
  const bool has_cert = !c.tls.cert_file.empty();
  if (has_cert != !c.tls.key_file.empty()) config_error("tls", "needs both cert_file and key_file");
}

EndpointConfig endpoint_config_from_json(const json& doc) {
  reject_unknown(doc, "",
                 {"base_url", "listen_host", "listen_port", "store", "token_root_key", "redirect_pool",
                  "marker_period", "pull_streams", "max_active_copies", "remote_timeout",
                  "min_stripe_bytes", "copy_enabled", "propfind_enabled", "token_service", "tls",
                  "faults"});
  EndpointConfig c;
  read(doc, "base_url", "", c.base_url);
  read(doc, "listen_host", "", c.listen_host);
  read(doc, "listen_port", "", c.listen_port);
  read(doc, "token_root_key", "", c.token_root_key);
  read(doc, "redirect_pool", "", c.redirect_pool);
  read(doc, "marker_period", "", c.marker_period);
  read(doc, "pull_streams", "", c.pull_streams);
  read(doc, "max_active_copies", "", c.max_active_copies);
  read(doc, "remote_timeout", "", c.remote_timeout);
  read(doc, "min_stripe_bytes", "", c.min_stripe_bytes);
  read(doc, "copy_enabled", "", c.copy_enabled);
  read(doc, "propfind_enabled", "", c.propfind_enabled);

  if (auto it = doc.find("store"); it != doc.end()) {
    reject_unknown(*it, "store", {"backend", "root", "capacity_bytes"});
    std::string backend = "memory";
    read(*it, "backend", "store", backend);
    if (backend == "memory") {
      c.store.backend = store::Backend::kInMemory;
    } else if (backend == "directory") {
      c.store.backend = store::Backend::kDirectory;
    } else {
      config_error("store.backend", "must be \"memory\" or \"directory\"");
    }
    read(*it, "root", "store", c.store.root);
    std::optional<std::uint64_t> cap;
    if (it->contains("capacity_bytes") && !(*it)["capacity_bytes"].is_null()) {
      std::uint64_t v = 0;
      read(*it, "capacity_bytes", "store", v);
      cap = v;
    }
    c.store.capacity_bytes = cap;
  }

  if (auto it = doc.find("token_service"); it != doc.end()) {
    reject_unknown(*it, "token_service", {"enabled", "key_id", "default_lifetime", "max_lifetime", "clients"});
    auto& ts = c.token_service;
    read(*it, "enabled", "token_service", ts.enabled);
    read(*it, "key_id", "token_service", ts.key_id);
    read(*it, "default_lifetime", "token_service", ts.default_lifetime);
    read(*it, "max_lifetime", "token_service", ts.max_lifetime);
    if (auto cl = it->find("clients"); cl != it->end()) {
      if (!cl->is_array()) config_error("token_service.clients", "must be an array");
      for (std::size_t i = 0; i < cl->size(); ++i) {
        const std::string where = "token_service.clients[" + std::to_string(i) + "]";
        const auto& entry = (*cl)[i];
        reject_unknown(entry, where, {"client_id", "secret", "cert_subjects", "scopes"});
        token::ClientRegistration reg;
        read(entry, "client_id", where, reg.client_id);
        read(entry, "secret", where, reg.secret);
        read(entry, "cert_subjects", where, reg.cert_subjects);
        std::vector<std::string> scopes;
        read(entry, "scopes", where, scopes);
        for (const auto& s : scopes) {
          try {
            reg.grants.push_back(parse_scope(s));
          } catch (const TpcException&) {
            config_error(where + ".scopes", "contains an invalid scope \"" + s + "\"");
          }
        }
        if (reg.client_id.empty()) config_error(where + ".client_id", "must not be empty");
        ts.clients.push_back(std::move(reg));
      }
    }
  }

  if (auto it = doc.find("tls"); it != doc.end()) {
    reject_unknown(*it, "tls", {"cert_file", "key_file", "ca_file", "client_ca_file", "insecure_outbound"});
    read(*it, "cert_file", "tls", c.tls.cert_file);
    read(*it, "key_file", "tls", c.tls.key_file);
    read(*it, "ca_file", "tls", c.tls.ca_file);
    read(*it, "client_ca_file", "tls", c.tls.client_ca_file);
    read(*it, "insecure_outbound", "tls", c.tls.insecure_outbound);
  }

  if (auto it = doc.find("faults"); it != doc.end()) {
    reject_unknown(*it, "faults",
                   {"seed", "head_error_rate", "get_error_rate", "serve_rate_bytes_per_sec",
                    "stall_after_bytes", "no_range_support"});
    auto& f = c.faults;
    read(*it, "seed", "faults", f.seed);
    read(*it, "head_error_rate", "faults", f.head_error_rate);
    read(*it, "get_error_rate", "faults", f.get_error_rate);
    read(*it, "serve_rate_bytes_per_sec", "faults", f.serve_rate_bytes_per_sec);
    if (it->contains("stall_after_bytes") && !(*it)["stall_after_bytes"].is_null()) {
      std::uint64_t v = 0;
      read(*it, "stall_after_bytes", "faults", v);
      f.stall_after_bytes = v;
    }
    read(*it, "no_range_support", "faults", f.no_range_support);
  }

  validate(c);
  return c;
}

json to_json(const EndpointConfig& c) {
  json clients = json::array();
  for (const auto& reg : c.token_service.clients) clients.push_back(client_to_json(reg));
  json store = {{"backend", c.store.backend == store::Backend::kDirectory ? "directory" : "memory"}};
  if (!c.store.root.empty()) store["root"] = c.store.root.string();
  if (c.store.capacity_bytes) store["capacity_bytes"] = *c.store.capacity_bytes;
  json faults = {{"seed", c.faults.seed},
                 {"head_error_rate", c.faults.head_error_rate},
                 {"get_error_rate", c.faults.get_error_rate},
                 {"serve_rate_bytes_per_sec", c.faults.serve_rate_bytes_per_sec},
                 {"no_range_support", c.faults.no_range_support}};
  if (c.faults.stall_after_bytes) faults["stall_after_bytes"] = *c.faults.stall_after_bytes;
  return {
      {"base_url", c.base_url},
      {"listen_host", c.listen_host},
      {"listen_port", c.listen_port},
      {"store", store},
      {"token_root_key", c.token_root_key},
      {"redirect_pool", c.redirect_pool},
      {"marker_period", c.marker_period},
      {"pull_streams", c.pull_streams},
      {"max_active_copies", c.max_active_copies},
      {"remote_timeout", c.remote_timeout},
      {"min_stripe_bytes", c.min_stripe_bytes},
      {"copy_enabled", c.copy_enabled},
      {"propfind_enabled", c.propfind_enabled},
      {"token_service",
       {{"enabled", c.token_service.enabled},
        {"key_id", c.token_service.key_id},
        {"default_lifetime", c.token_service.default_lifetime},
        {"max_lifetime", c.token_service.max_lifetime},
        {"clients", clients}}},
      {"tls",
       {{"cert_file", c.tls.cert_file.string()},
        {"key_file", c.tls.key_file.string()},
        {"ca_file", c.tls.ca_file.string()},
        {"client_ca_file", c.tls.client_ca_file.string()},
        {"insecure_outbound", c.tls.insecure_outbound}}},
      {"faults", faults},
  };
}

EndpointConfig load_endpoint_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw TpcException(ErrorKind::kBadRequest, "config: cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw TpcException(ErrorKind::kBadRequest, "config: " + file.string() + " is not valid JSON: " + e.what());
  }
  return endpoint_config_from_json(doc);
}

}  // namespace httptpc::endpoint
