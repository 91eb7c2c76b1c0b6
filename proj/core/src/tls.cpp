// Copyright 2026 The AnonProxy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "anonproxy/tls.hpp"

#include <arpa/inet.h>
#include <openssl/bio.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/ssl.h>
#include <openssl/x509v3.h>

#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "anonproxy/model.hpp"

namespace anonproxy {

namespace {

using X509Ptr = std::unique_ptr<X509, decltype(&X509_free)>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, decltype(&EVP_PKEY_free)>;
using CtxPtr = std::unique_ptr<SSL_CTX, decltype(&SSL_CTX_free)>;

[[noreturn]] void throw_openssl(const std::string& what) {
  char buf[256];
  ERR_error_string_n(ERR_get_error(), buf, sizeof(buf));
  throw Error(what + ": " + buf);
}

PkeyPtr generate_key() {
  EVP_PKEY* key = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256");
  if (key == nullptr) throw_openssl("EC key generation failed");
  return {key, EVP_PKEY_free};
}

void set_random_serial(X509* cert) {
  unsigned char bytes[8];
  RAND_bytes(bytes, sizeof(bytes));
  bytes[0] &= 0x7f;  // positive
  uint64_t serial = 0;
  for (unsigned char b : bytes) serial = (serial << 8) | b;
  ASN1_INTEGER_set_uint64(X509_get_serialNumber(cert), serial);
}

void add_extension(X509* cert, X509* issuer, int nid, const char* value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
  if (ext == nullptr) throw_openssl(std::string("extension ") + value);
  X509_add_ext(cert, ext, -1);
  X509_EXTENSION_free(ext);
}

bool is_ip_literal(const std::string& host) {
  in_addr v4{};
  in6_addr v6{};
  return inet_pton(AF_INET, host.c_str(), &v4) == 1 ||
         inet_pton(AF_INET6, host.c_str(), &v6) == 1;
}

std::string pem_of_cert(X509* cert) {
  BIO* bio = BIO_new(BIO_s_mem());
  PEM_write_bio_X509(bio, cert);
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  std::string out(data, static_cast<std::size_t>(len));
  BIO_free(bio);
  return out;
}

std::string pem_of_key(EVP_PKEY* key) {
  BIO* bio = BIO_new(BIO_s_mem());
  PEM_write_bio_PrivateKey(bio, key, nullptr, nullptr, 0, nullptr, nullptr);
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  std::string out(data, static_cast<std::size_t>(len));
  BIO_free(bio);
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw ConfigError("cannot write " + path);
  std::fwrite(content.data(), 1, content.size(), f);
  std::fclose(f);
}

}  // namespace

struct CertificateAuthority::Impl {
  PkeyPtr ca_key{nullptr, EVP_PKEY_free};
  X509Ptr ca_cert{nullptr, X509_free};
  PkeyPtr leaf_key{nullptr, EVP_PKEY_free};  // one key shared by all leaves
  std::map<std::string, CtxPtr> contexts;
  std::mutex mutex;
};

CertificateAuthority::CertificateAuthority() : impl_(std::make_unique<Impl>()) {}
CertificateAuthority::~CertificateAuthority() = default;
CertificateAuthority::CertificateAuthority(CertificateAuthority&&) noexcept = default;
CertificateAuthority& CertificateAuthority::operator=(CertificateAuthority&&) noexcept = default;

CertificateAuthority CertificateAuthority::generate() {
  CertificateAuthority ca;
  ca.impl_->ca_key = generate_key();
  ca.impl_->leaf_key = generate_key();

  X509Ptr cert(X509_new(), X509_free);
  X509_set_version(cert.get(), 2);
  set_random_serial(cert.get());
  X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), 60L * 60 * 24 * 365 * 5);

  X509_NAME* name = X509_get_subject_name(cert.get());
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>("anonproxy root CA"),
                             -1, -1, 0);
  X509_NAME_add_entry_by_txt(name, "O", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>("anonproxy"), -1, -1, 0);
  X509_set_issuer_name(cert.get(), name);
  X509_set_pubkey(cert.get(), ca.impl_->ca_key.get());

  add_extension(cert.get(), cert.get(), NID_basic_constraints, "critical,CA:TRUE");
  add_extension(cert.get(), cert.get(), NID_key_usage, "critical,keyCertSign,cRLSign");
  add_extension(cert.get(), cert.get(), NID_subject_key_identifier, "hash");

  if (X509_sign(cert.get(), ca.impl_->ca_key.get(), EVP_sha256()) == 0) {
    throw_openssl("CA self-sign failed");
  }
  ca.impl_->ca_cert = std::move(cert);
  return ca;
}

CertificateAuthority CertificateAuthority::load_or_generate(const std::string& cert_path,
                                                            const std::string& key_path) {
  namespace fs = std::filesystem;
  if (fs::exists(cert_path) && fs::exists(key_path)) {
    CertificateAuthority ca;
    FILE* cf = std::fopen(cert_path.c_str(), "rb");
    FILE* kf = std::fopen(key_path.c_str(), "rb");
    if (cf == nullptr || kf == nullptr) {
      if (cf) std::fclose(cf);
      if (kf) std::fclose(kf);
      throw ConfigError("cannot read CA material from " + cert_path + " / " + key_path);
    }
    ca.impl_->ca_cert.reset(PEM_read_X509(cf, nullptr, nullptr, nullptr));
    ca.impl_->ca_key.reset(PEM_read_PrivateKey(kf, nullptr, nullptr, nullptr));
    std::fclose(cf);
    std::fclose(kf);
    if (!ca.impl_->ca_cert || !ca.impl_->ca_key) {
      throw ConfigError("malformed CA material in " + cert_path + " / " + key_path);
    }
    ca.impl_->leaf_key = generate_key();
    return ca;
  }
  CertificateAuthority ca = generate();
  if (auto dir = fs::path(cert_path).parent_path(); !dir.empty()) fs::create_directories(dir);
  ca.write_cert_pem(cert_path);
  ca.write_key_pem(key_path);
  return ca;
}

void CertificateAuthority::write_cert_pem(const std::string& path) const {
  write_text_file(path, pem_of_cert(impl_->ca_cert.get()));
}

void CertificateAuthority::write_key_pem(const std::string& path) const {
  write_text_file(path, pem_of_key(impl_->ca_key.get()));
}

std::string CertificateAuthority::cert_pem() const {
  return pem_of_cert(impl_->ca_cert.get());
}

SSL_CTX* CertificateAuthority::server_context_for(const std::string& host) {
  std::lock_guard lock(impl_->mutex);
  if (auto it = impl_->contexts.find(host); it != impl_->contexts.end()) {
    return it->second.get();
  }

  X509Ptr leaf(X509_new(), X509_free);
  X509_set_version(leaf.get(), 2);
  set_random_serial(leaf.get());
  X509_gmtime_adj(X509_getm_notBefore(leaf.get()), -3600);
  X509_gmtime_adj(X509_getm_notAfter(leaf.get()), 60L * 60 * 24 * 398);

  X509_NAME* subject = X509_get_subject_name(leaf.get());
  X509_NAME_add_entry_by_txt(subject, "CN", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>(host.c_str()), -1, -1, 0);
  X509_set_issuer_name(leaf.get(), X509_get_subject_name(impl_->ca_cert.get()));
  X509_set_pubkey(leaf.get(), impl_->leaf_key.get());

  const std::string san =
      (is_ip_literal(host) ? "IP:" : "DNS:") + host;
  add_extension(leaf.get(), impl_->ca_cert.get(), NID_subject_alt_name, san.c_str());
  add_extension(leaf.get(), impl_->ca_cert.get(), NID_basic_constraints, "CA:FALSE");
  add_extension(leaf.get(), impl_->ca_cert.get(), NID_ext_key_usage, "serverAuth");

  if (X509_sign(leaf.get(), impl_->ca_key.get(), EVP_sha256()) == 0) {
    throw_openssl("leaf sign failed for " + host);
  }

  CtxPtr ctx(SSL_CTX_new(TLS_server_method()), SSL_CTX_free);
  if (!ctx) throw_openssl("SSL_CTX_new failed");
  if (SSL_CTX_use_certificate(ctx.get(), leaf.get()) != 1 ||
      SSL_CTX_use_PrivateKey(ctx.get(), impl_->leaf_key.get()) != 1) {
    throw_openssl("leaf install failed for " + host);
  }
  // Ship the CA alongside so clients trusting only the root can build
  // the chain.
  X509_up_ref(impl_->ca_cert.get());
  SSL_CTX_add_extra_chain_cert(ctx.get(), impl_->ca_cert.get());

  SSL_CTX* raw = ctx.get();
  impl_->contexts.emplace(host, std::move(ctx));
  return raw;
}

}  // namespace anonproxy
