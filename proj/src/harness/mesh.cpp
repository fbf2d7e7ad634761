#include "httptpc/harness/mesh.hpp"

#include <atomic>
#include <unistd.h>

namespace httptpc::harness {

namespace {

// Trust stores match issuers by subject, so concurrent meshes whose CAs
// end up in one bundle need distinct names.
std::string unique_ca_name() {
  static std::atomic<int> counter{0};
  return "httptpc mesh CA " + std::to_string(::getpid()) + "-" + std::to_string(counter++);
}

}  // namespace

Mesh::Mesh(MeshOptions options)
    : options_(std::move(options)), ca_(unique_ca_name()), leaf_(ca_.issue_server({"127.0.0.1", "localhost"})) {
  client_tls_.ca_pem = ca_.cert_pem();
  for (int i = 0; i < options_.endpoints; ++i) add(options_.base);
}

Mesh::~Mesh() { stop(); }

std::size_t Mesh::add(endpoint::EndpointConfig config) {
  const std::size_t index = endpoints_.size();
  config.listen_host = "127.0.0.1";
  config.listen_port = 0;
  config.base_url.clear();
  config.token_root_key = "mesh-" + std::to_string(options_.seed) + "-key-" + std::to_string(index);
  if (!options_.directory_root.empty()) {
    config.store.backend = store::Backend::kDirectory;
    config.store.root = options_.directory_root / ("ep" + std::to_string(index));
  }
  token::ClientRegistration reg;
  reg.client_id = options_.client_id;
  reg.secret = options_.client_secret;
  for (const Activity a : kAllActivities) reg.grants.push_back(Scope{a, VirtualPath{}});
  config.token_service.clients.push_back(reg);

  endpoint::EndpointTls tls;
  tls.server = {leaf_.cert_pem, leaf_.key_pem, ca_.cert_pem()};
  tls.outbound.ca_pem = ca_.cert_pem();
  tls.outbound.insecure = config.tls.insecure_outbound;
  auto ep = std::make_unique<endpoint::Endpoint>(std::move(config), std::move(tls));
  ep->start();
  endpoints_.push_back(std::move(ep));
  return index;
}

std::string Mesh::url(std::size_t i, const std::string& path) const {
  return endpoints_.at(i)->base_url() + path;
}

client::ClientCredential Mesh::credential() const {
  return {options_.client_id, options_.client_secret, std::nullopt};
}

void Mesh::stop() {
  for (auto& ep : endpoints_) ep->stop();
}

}  // namespace httptpc::harness
