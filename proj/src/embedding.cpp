#include <cmath>

#include "nl2ltl/error.hpp"
#include "nl2ltl/gateway.hpp"

namespace nl2ltl::gateway {

std::vector<double> TrigramEmbedder::embed(const std::string& text) {
  if (text.empty()) throw Error(Errc::InvalidArgument, "cannot embed empty text");
  std::vector<double> v(kDimension, 0.0);
  const std::string padded = "#" + text + "#";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    v[fnv1a64(std::string_view(padded).substr(i, 3)) % kDimension] += 1.0;
  }
  return v;
}

std::vector<double> CachingEmbedder::embed(const std::string& text) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(text); it != cache_.end()) return it->second;
  }
  auto v = inner_->embed(text);
  std::lock_guard lock(mutex_);
  return cache_.emplace(text, std::move(v)).first->second;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace nl2ltl::gateway
