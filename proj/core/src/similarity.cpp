#include "flesd/similarity.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "flesd/byte_io.hpp"
#include "flesd/error.hpp"

namespace flesd {
namespace {

constexpr char kRepMagic[] = "FLSDREP1";

}  // namespace

RepresentationMatrix infer_representations(const EncoderParams& params, const Dataset& d_pub,
                                           int client_id) {
  if (d_pub.empty()) throw DegenerateInputError("infer_representations: public dataset is empty");
  Matrix reps;
  try {
    reps = encode(params, d_pub.features);
  } catch (const DegenerateInputError&) {
    // Locate the first offending sample so the error names it.
    for (std::size_t i = 0; i < d_pub.size(); ++i) {
      const std::size_t row[] = {i};
      try {
        (void)encode(params, gather_rows(d_pub.features, row));
      } catch (const DegenerateInputError&) {
        throw DegenerateInputError("infer_representations: degenerate representation for sample id " +
                                   std::to_string(d_pub.ids[i]));
      }
    }
    throw;
  }
  return RepresentationMatrix{transpose(reps), client_id};
}

SimilarityMatrix similarity_matrix(const RepresentationMatrix& r) {
  const std::size_t n = r.count();
  const Matrix cols = transpose(r.columns);  // N x d, row i = sample i
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(cols.row(i), cols.row(j));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return SimilarityMatrix{std::move(m)};
}

EnsembleTarget sharpen(const SimilarityMatrix& m, double target_temperature) {
  if (!(target_temperature > 0.0)) throw ParameterError("sharpen: tau_T must be > 0");
  if (target_temperature < kMinTargetTemperature) {
    throw ParameterError("sharpen: tau_T below " + std::to_string(kMinTargetTemperature) +
                         " risks overflow");
  }
  Matrix out = m.entries;
  for (double& v : out.data()) v = std::exp(v / target_temperature);
  return EnsembleTarget{std::move(out), target_temperature};
}

EnsembleTarget ensemble(std::span<const EnsembleTarget> sharpened) {
  if (sharpened.empty()) throw ParameterError("ensemble: no client matrices");
  const EnsembleTarget& first = sharpened.front();
  Matrix acc(first.entries.rows(), first.entries.cols());
  for (const EnsembleTarget& t : sharpened) {
    if (!t.entries.same_shape(first.entries)) {
      throw ParameterError("ensemble: client matrices differ in shape");
    }
    if (t.target_temperature != first.target_temperature) {
      throw ParameterError("ensemble: client matrices were sharpened at different tau_T");
    }
    acc += t.entries;
  }
  const double inv = static_cast<double>(sharpened.size());
  for (double& v : acc.data()) v /= inv;
  return EnsembleTarget{std::move(acc), first.target_temperature};
}

std::size_t representation_snapshot_size(std::size_t dim, std::size_t count) {
  return kRepresentationHeaderSize + 8 * dim * count;
}

std::vector<std::uint8_t> serialize(const RepresentationMatrix& r, double target_temperature) {
  std::vector<std::uint8_t> out(kRepMagic, kRepMagic + 8);
  out.reserve(representation_snapshot_size(r.dim(), r.count()));
  bytes::put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(r.source_client)));
  bytes::put_u32(out, static_cast<std::uint32_t>(r.dim()));
  bytes::put_u32(out, static_cast<std::uint32_t>(r.count()));
  bytes::put_u32(out, 0);
  bytes::put_f64(out, target_temperature);
  for (std::size_t j = 0; j < r.count(); ++j)
    for (std::size_t i = 0; i < r.dim(); ++i) bytes::put_f64(out, r.columns(i, j));
  return out;
}

RepresentationMatrix deserialize_representations(std::span<const std::uint8_t> data,
                                                 double* target_temperature) {
  bytes::Reader in(data);
  if (in.raw(8) != std::string(kRepMagic, 8)) throw FormatError("representation snapshot: bad magic");
  const auto client = static_cast<std::int32_t>(in.u32());
  const std::size_t d = in.u32();
  const std::size_t n = in.u32();
  (void)in.u32();
  const double tau = in.f64();
  if (in.remaining() != 8 * d * n) throw FormatError("representation snapshot: payload size mismatch");
  RepresentationMatrix r{Matrix(d, n), client};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < d; ++i) r.columns(i, j) = in.f64();
  if (target_temperature != nullptr) *target_temperature = tau;
  return r;
}

void save_representations(const RepresentationMatrix& r, const std::filesystem::path& path) {
  const auto b = serialize(r, std::numeric_limits<double>::quiet_NaN());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace flesd
