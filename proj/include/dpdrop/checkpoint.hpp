// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary model checkpoint format.
//
// Layout (little-endian):
//   bytes  0..7   magic "DPDCKPT1"
//   bytes  8..11  u32 d_in
//   bytes 12..15  u32 hidden
//   bytes 16..19  u32 classes
//   then doubles: hidden_weights row-major (d_in x hidden), hidden_bias,
//   output_weights row-major (hidden x classes), output_bias.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dpdrop/errors.hpp"
#include "dpdrop/mlp.hpp"

namespace dpdrop {

inline constexpr char kCheckpointMagic[8] = {'D', 'P', 'D', 'C',
                                             'K', 'P', 'T', '1'};

namespace detail {

inline void write_u32_le(std::ostream& out, std::uint32_t value) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i)
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline std::uint32_t read_u32_le(std::istream& in, const std::string& field) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (in.gcount() != 4)
    throw FormatError("checkpoint: truncated " + field);
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i)
    value |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return value;
}

inline void write_matrix_row_major(std::ostream& out,
                                   const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
}

inline void read_matrix_row_major(std::istream& in, Eigen::MatrixXd& m,
                                  const std::string& field) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      if (in.gcount() != sizeof(double))
        throw FormatError("checkpoint: truncated " + field);
      m(i, j) = v;
    }
  }
}

inline void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = v(i);
    out.write(reinterpret_cast<const char*>(&x), sizeof(double));
  }
}

inline void read_vector(std::istream& in, Eigen::VectorXd& v,
                        const std::string& field) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double x = 0.0;
    in.read(reinterpret_cast<char*>(&x), sizeof(double));
    if (in.gcount() != sizeof(double))
      throw FormatError("checkpoint: truncated " + field);
    v(i) = x;
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good())
    throw FormatError("checkpoint: cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u32_le(out, static_cast<std::uint32_t>(p.d_in()));
  detail::write_u32_le(out, static_cast<std::uint32_t>(p.hidden()));
  detail::write_u32_le(out, static_cast<std::uint32_t>(p.classes()));
  detail::write_matrix_row_major(out, p.hidden_weights);
  detail::write_vector(out, p.hidden_bias);
  detail::write_matrix_row_major(out, p.output_weights);
  detail::write_vector(out, p.output_bias);
  out.flush();
  if (!out.good())
    throw FormatError("checkpoint: write to '" + path + "' failed");
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good())
    throw FormatError("checkpoint: cannot open '" + path + "'");
  char magic[sizeof(kCheckpointMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw FormatError("checkpoint: bad magic in '" + path + "'");
  const auto d_in = detail::read_u32_le(in, "d_in");
  const auto hidden = detail::read_u32_le(in, "hidden");
  const auto classes = detail::read_u32_le(in, "classes");
  if (d_in < 1 || hidden < 1 || classes < 2)
    throw FormatError("checkpoint: invalid dimensions in '" + path + "'");

  ModelParams p;
  p.hidden_weights.resize(static_cast<Eigen::Index>(d_in),
                          static_cast<Eigen::Index>(hidden));
  p.hidden_bias.resize(static_cast<Eigen::Index>(hidden));
  p.output_weights.resize(static_cast<Eigen::Index>(hidden),
                          static_cast<Eigen::Index>(classes));
  p.output_bias.resize(static_cast<Eigen::Index>(classes));
  detail::read_matrix_row_major(in, p.hidden_weights, "hidden weights");
  detail::read_vector(in, p.hidden_bias, "hidden bias");
  detail::read_matrix_row_major(in, p.output_weights, "output weights");
  detail::read_vector(in, p.output_bias, "output bias");

  char extra = 0;
  in.read(&extra, 1);
  if (in.gcount() != 0)
    throw FormatError("checkpoint: trailing bytes in '" + path + "'");
  return p;
}

}  // namespace dpdrop