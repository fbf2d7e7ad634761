#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace httptpc::net {

struct PemPair {
  std::string cert_pem;
  std::string key_pem;
};

/// An in-process certificate authority for hermetic meshes. Keys are
/// P-256 and live only in memory; certificates are valid for a day.
class EphemeralCa {
 public:
  explicit EphemeralCa(const std::string& common_name = "httptpc ephemeral CA");
  ~EphemeralCa();
  EphemeralCa(EphemeralCa&&) noexcept;
  EphemeralCa& operator=(EphemeralCa&&) noexcept;

  const std::string& cert_pem() const noexcept { return cert_pem_; }

  /// Server leaf; `hosts` become subjectAltName entries (IP literals as
  /// iPAddress, everything else as dNSName).
  PemPair issue_server(const std::vector<std::string>& hosts) const;
  /// Client leaf for mutual TLS; the subject is "CN=<common_name>".
  PemPair issue_client(const std::string& common_name) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
  std::string cert_pem_;
};

/// Subject name rendered RFC 2253 style, e.g. "CN=alice,O=site".
std::string subject_of_pem(const std::string& cert_pem);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace httptpc::net
