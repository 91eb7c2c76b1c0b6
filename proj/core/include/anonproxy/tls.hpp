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

#ifndef ANONPROXY_TLS_HPP_
#define ANONPROXY_TLS_HPP_

#include <map>
#include <memory>
#include <mutex>
#include <string>

typedef struct ssl_ctx_st SSL_CTX;
typedef struct x509_st X509;
typedef struct evp_pkey_st EVP_PKEY;

namespace anonproxy {

// Locally generated root CA that mints per-host leaf certificates on
// demand, so intercepted TLS sessions present a name the client will
// accept once it trusts the CA. Leaf contexts are cached per host.
class CertificateAuthority {
 public:
  CertificateAuthority();
  ~CertificateAuthority();

  CertificateAuthority(const CertificateAuthority&) = delete;
  CertificateAuthority& operator=(const CertificateAuthority&) = delete;
  CertificateAuthority(CertificateAuthority&&) noexcept;
  CertificateAuthority& operator=(CertificateAuthority&&) noexcept;

  static CertificateAuthority generate();

  // Loads cert_path / key_path when both exist, otherwise generates a
  // fresh CA and writes both files.
  static CertificateAuthority load_or_generate(const std::string& cert_path,
                                               const std::string& key_path);

  void write_cert_pem(const std::string& path) const;
  void write_key_pem(const std::string& path) const;
  std::string cert_pem() const;

  // Server context presenting a leaf for `host` (SAN DNS or IP), signed
  // by this CA. Cached; safe from concurrent connections.
  SSL_CTX* server_context_for(const std::string& host);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace anonproxy

#endif  // ANONPROXY_TLS_HPP_
