#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "httptpc/client/orchestrator.hpp"
#include "httptpc/endpoint/endpoint.hpp"
#include "httptpc/net/tls.hpp"

namespace httptpc::harness {

struct MeshOptions {
  int endpoints = 3;
  /// Template for every member; listen_port and token_root_key are
  /// overridden per member.
  endpoint::EndpointConfig base;
  std::string client_id = "harness";
  std::string client_secret = "harness-secret";
  /// When set, members use directory stores under <root>/ep<i>.
  std::filesystem::path directory_root;
  std::uint64_t seed = 1;
};

/// Endpoints on loopback ports sharing one ephemeral CA. The harness
/// client is registered on each member with every activity on "/".
class Mesh {
 public:
  explicit Mesh(MeshOptions options);
  ~Mesh();

  std::size_t size() const noexcept { return endpoints_.size(); }
  endpoint::Endpoint& at(std::size_t i) { return *endpoints_.at(i); }
  std::string url(std::size_t i, const std::string& path) const;

  const net::ClientTls& client_tls() const noexcept { return client_tls_; }
  client::ClientCredential credential() const;
  client::Credentials credentials() const { return {credential(), credential()}; }
  const net::EphemeralCa& ca() const noexcept { return ca_; }

  /// Adds and starts one more member built from `config` (ports and keys
  /// are filled in as for the others). Returns its index.
  std::size_t add(endpoint::EndpointConfig config);
  void stop();

 private:
  MeshOptions options_;
  net::EphemeralCa ca_;
  net::PemPair leaf_;
  net::ClientTls client_tls_;
  std::vector<std::unique_ptr<endpoint::Endpoint>> endpoints_;
};

}  // namespace httptpc::harness
