#include "httptpc/net/tls.hpp"

#include <openssl/bio.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <arpa/inet.h>

#include <fstream>
#include <sstream>

#include "httptpc/core/error.hpp"

namespace httptpc::net {
namespace {

struct PkeyFree {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct X509Free {
  void operator()(X509* p) const { X509_free(p); }
};
struct BioFree {
  void operator()(BIO* p) const { BIO_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyFree>;
using X509Ptr = std::unique_ptr<X509, X509Free>;
using BioPtr = std::unique_ptr<BIO, BioFree>;

[[noreturn]] void fail(const char* what) {
  const unsigned long code = ERR_get_error();
  char buf[256] = {0};
  if (code != 0) ERR_error_string_n(code, buf, sizeof buf);
  throw std::runtime_error(std::string("tls: ") + what + (code ? std::string(": ") + buf : ""));
}

PkeyPtr generate_key() {
  PkeyPtr key(EVP_EC_gen("P-256"));
  if (!key) fail("key generation failed");
  return key;
}

std::string pem_of(X509* cert) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_X509(bio.get(), cert) != 1) fail("PEM encode of certificate");
  char* data = nullptr;
  const long n = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(n));
}

std::string pem_of(EVP_PKEY* key) {
  BioPtr bio(BIO_new(BIO_s_mem()));
  if (!bio || PEM_write_bio_PrivateKey(bio.get(), key, nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    fail("PEM encode of key");
  }
  char* data = nullptr;
  const long n = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(n));
}

void add_extension(X509* cert, X509* issuer, int nid, const std::string& value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value.c_str());
  if (ext == nullptr) fail("building extension");
  X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
}

X509Ptr new_certificate(EVP_PKEY* subject_key, const std::string& common_name,
                        X509* issuer_cert) {
  X509Ptr cert(X509_new());
  if (!cert) fail("X509_new");
  X509_set_version(cert.get(), 2);

  unsigned char serial[16];
  RAND_bytes(serial, sizeof serial);
  serial[0] &= 0x7f;
  BIGNUM* bn = BN_bin2bn(serial, sizeof serial, nullptr);
  BN_to_ASN1_INTEGER(bn, X509_get_serialNumber(cert.get()));
  BN_free(bn);

  X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), 24 * 3600);
  X509_set_pubkey(cert.get(), subject_key);

  X509_NAME* name = X509_get_subject_name(cert.get());
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_UTF8,
                             reinterpret_cast<const unsigned char*>(common_name.c_str()), -1, -1,
                             0);
  X509_set_issuer_name(cert.get(),
                       issuer_cert ? X509_get_subject_name(issuer_cert) : name);
  return cert;
}

bool is_ip_literal(const std::string& host) {
  unsigned char buf[16];
  return inet_pton(AF_INET, host.c_str(), buf) == 1 || inet_pton(AF_INET6, host.c_str(), buf) == 1;
}

}  // namespace

struct EphemeralCa::State {
  PkeyPtr key;
  X509Ptr cert;
};

EphemeralCa::EphemeralCa(const std::string& common_name) : state_(std::make_unique<State>()) {
  state_->key = generate_key();
  state_->cert = new_certificate(state_->key.get(), common_name, nullptr);
  X509* cert = state_->cert.get();
  add_extension(cert, cert, NID_basic_constraints, "critical,CA:TRUE");
  add_extension(cert, cert, NID_key_usage, "critical,keyCertSign,cRLSign");
  add_extension(cert, cert, NID_subject_key_identifier, "hash");
  if (X509_sign(cert, state_->key.get(), EVP_sha256()) == 0) fail("signing CA");
  cert_pem_ = pem_of(cert);
}

EphemeralCa::~EphemeralCa() = default;
EphemeralCa::EphemeralCa(EphemeralCa&&) noexcept = default;
EphemeralCa& EphemeralCa::operator=(EphemeralCa&&) noexcept = default;

PemPair EphemeralCa::issue_server(const std::vector<std::string>& hosts) const {
  if (hosts.empty()) throw std::invalid_argument("issue_server: no hosts");
  PkeyPtr key = generate_key();
  X509Ptr cert = new_certificate(key.get(), hosts.front(), state_->cert.get());
  std::string san;
  for (const auto& h : hosts) {
    if (!san.empty()) san += ",";
    san += (is_ip_literal(h) ? "IP:" : "DNS:") + h;
  }
  add_extension(cert.get(), state_->cert.get(), NID_basic_constraints, "critical,CA:FALSE");
  add_extension(cert.get(), state_->cert.get(), NID_subject_alt_name, san);
  add_extension(cert.get(), state_->cert.get(), NID_ext_key_usage, "serverAuth");
  if (X509_sign(cert.get(), state_->key.get(), EVP_sha256()) == 0) fail("signing server leaf");
  return {pem_of(cert.get()), pem_of(key.get())};
}

PemPair EphemeralCa::issue_client(const std::string& common_name) const {
  PkeyPtr key = generate_key();
  X509Ptr cert = new_certificate(key.get(), common_name, state_->cert.get());
  add_extension(cert.get(), state_->cert.get(), NID_basic_constraints, "critical,CA:FALSE");
  add_extension(cert.get(), state_->cert.get(), NID_ext_key_usage, "clientAuth");
  if (X509_sign(cert.get(), state_->key.get(), EVP_sha256()) == 0) fail("signing client leaf");
  return {pem_of(cert.get()), pem_of(key.get())};
}

std::string subject_of_pem(const std::string& cert_pem) {
  BioPtr bio(BIO_new_mem_buf(cert_pem.data(), static_cast<int>(cert_pem.size())));
  X509Ptr cert(PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr));
  if (!cert) fail("parsing certificate");
  BioPtr out(BIO_new(BIO_s_mem()));
  X509_NAME_print_ex(out.get(), X509_get_subject_name(cert.get()), 0, XN_FLAG_RFC2253);
  char* data = nullptr;
  const long n = BIO_get_mem_data(out.get(), &data);
  return std::string(data, static_cast<std::size_t>(n));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TpcException(ErrorKind::kBadRequest, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) {
    throw TpcException(ErrorKind::kBadRequest, "cannot write " + path.string());
  }
}

}  // namespace httptpc::net
