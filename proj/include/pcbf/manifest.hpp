#pragma once

// Run manifests: training history CSV and git-style content hashes.
// Needs OpenSSL's libcrypto at link time (SHA-1).

#include <openssl/evp.h>

#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pcbf/trainer.hpp"

namespace pcbf {

/// SHA-1 of "blob <size>\0<content>", i.e. what `git hash-object` prints.
inline std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("sha1: cannot allocate context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1: digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

/// iteration,L_feas,L_vol,region,d_norm[,wall_ms]. Without the timing column
/// the text is a pure function of config and seed.
inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& rows,
                              bool with_timing = true) {
  out << "iteration,L_feas,L_vol,region,d_norm";
  if (with_timing) out << ",wall_ms";
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.feas << ',' << r.vol << ',' << r.region << ',' << r.d_norm;
    if (with_timing) out << ',' << r.wall_ms;
    out << '\n';
  }
}

inline std::string history_hash(const std::vector<HistoryRow>& rows) {
  std::ostringstream os;
  write_history_csv(os, rows, false);
  return git_blob_sha1(os.str());
}

}  // namespace pcbf
