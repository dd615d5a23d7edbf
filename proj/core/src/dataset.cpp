#include "deann/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>

#include "deann/errors.hpp"
#include "deann/rng.hpp"

namespace deann {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'E', 'A', 'N', 'N', '1', '\0', '\0'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32le(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset parse_binary(const std::string& bytes, const std::filesystem::path& path) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderBytes)
    throw ParseError(path.string() + ": truncated header at byte " + std::to_string(bytes.size()));
  if (std::memcmp(p, kMagic.data(), kMagic.size()) != 0)
    throw ParseError(path.string() + ": bad magic at byte 0");
  const std::uint32_t n = get_u32le(p + 8);
  const std::uint32_t d = get_u32le(p + 12);
  if (n == 0) throw ParseError(path.string() + ": zero row count at byte 8");
  if (d == 0) throw ParseError(path.string() + ": zero dimension at byte 12");
  const std::size_t count = static_cast<std::size_t>(n) * d;
  const std::size_t expected = kHeaderBytes + 4 * count;
  if (bytes.size() < expected)
    throw ParseError(path.string() + ": truncated data at byte " + std::to_string(bytes.size()) +
                     ", expected " + std::to_string(expected) + " bytes");
  if (bytes.size() > expected)
    throw ParseError(path.string() + ": trailing bytes at byte " + std::to_string(expected));
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32le(p + kHeaderBytes + 4 * i);
    data[i] = std::bit_cast<float>(bits);
    if (!std::isfinite(data[i]))
      throw ParseError(path.string() + ": non-finite value at byte " +
                       std::to_string(kHeaderBytes + 4 * i));
  }
  return Dataset(n, d, std::move(data));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

Dataset parse_csv(const std::string& text, const std::filesystem::path& path) {
  std::vector<float> data;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    std::size_t fields = 0;
    while (true) {
      const std::size_t comma = line.find(',');
      const std::string_view field = trim(line.substr(0, comma));
      float value = 0.0f;
      const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc() || end != field.data() + field.size() || !std::isfinite(value))
        throw ParseError(path.string() + ": line " + std::to_string(line_no) + ", field " +
                         std::to_string(fields + 1) + ": not a finite number: '" +
                         std::string(field) + "'");
      data.push_back(value);
      ++fields;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (n == 0) {
      d = fields;
    } else if (fields != d) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(fields) + " fields, expected " + std::to_string(d));
    }
    ++n;
  }
  if (n == 0) throw ParseError(path.string() + ": no rows");
  return Dataset(n, d, std::move(data));
}

}  // namespace

double sq_norm(std::span<const float> x) noexcept {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double v = x[t];
    acc += v * v;
  }
  return acc;
}

Dataset::Dataset(std::size_t n, std::size_t d, std::vector<float> data)
    : n_(n), d_(d), data_(std::move(data)) {
  if (n_ == 0) throw std::invalid_argument("dataset must have at least one row");
  if (d_ == 0) throw std::invalid_argument("dataset dimension must be positive");
  if (data_.size() != n_ * d_)
    throw std::invalid_argument("dataset buffer holds " + std::to_string(data_.size()) +
                                " values, expected " + std::to_string(n_ * d_));
  for (const float v : data_)
    if (!std::isfinite(v)) throw std::invalid_argument("dataset contains a non-finite value");
  sq_norms_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) sq_norms_[i] = deann::sq_norm(row(i));
}

Dataset Dataset::from_rows(const std::vector<std::vector<float>>& rows) {
  if (rows.empty()) throw std::invalid_argument("dataset must have at least one row");
  const std::size_t d = rows.front().size();
  std::vector<float> data;
  data.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("rows have different lengths");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Dataset(rows.size(), d, std::move(data));
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * d_);
  for (const std::size_t i : indices) {
    if (i >= n_) throw std::out_of_range("row index out of range");
    const auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return Dataset(indices.size(), d_, std::move(out));
}

DataFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DataFormat::Csv : DataFormat::Binary;
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format) {
  const std::string bytes = read_file(path);
  return format == DataFormat::Binary ? parse_binary(bytes, path) : parse_csv(bytes, path);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DataFormat format) {
  std::string out;
  if (format == DataFormat::Binary) {
    if (dataset.size() > UINT32_MAX || dataset.dim() > UINT32_MAX)
      throw std::invalid_argument("dataset too large for the binary format");
    out.reserve(kHeaderBytes + 4 * dataset.data().size());
    out.append(kMagic.data(), kMagic.size());
    put_u32le(out, static_cast<std::uint32_t>(dataset.size()));
    put_u32le(out, static_cast<std::uint32_t>(dataset.dim()));
    for (const float v : dataset.data()) put_u32le(out, std::bit_cast<std::uint32_t>(v));
  } else {
    std::array<char, 64> buf{};
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto r = dataset.row(i);
      for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) out.push_back(',');
        // Shortest representation that parses back to the same float.
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), r[t]);
        out.append(buf.data(), res.ptr);
      }
      out.push_back('\n');
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("write failed: " + path.string());
}

std::size_t holdout_size(std::size_t n) noexcept { return std::min<std::size_t>(500, (n - 1) / 2); }

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

Splits split(const Dataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n <= 2) throw std::invalid_argument("split needs more than two rows");
  const std::vector<std::size_t> order = random_permutation(n, seed);
  const std::size_t h = holdout_size(n);
  std::vector<std::size_t> val(order.begin(), order.begin() + h);
  std::vector<std::size_t> test(order.begin() + h, order.begin() + 2 * h);
  std::vector<std::size_t> train(order.begin() + 2 * h, order.end());
  return Splits{dataset.select(train), dataset.select(val),  dataset.select(test), seed,
                std::move(train),      std::move(val),       std::move(test)};
}

PermutedDataset::PermutedDataset(Dataset base, std::vector<std::size_t> permutation)
    : base_(std::move(base)), perm_(std::move(permutation)), inverse_(perm_.size()) {
  if (perm_.size() != base_.size())
    throw std::invalid_argument("permutation length differs from dataset size");
  std::vector<bool> seen(perm_.size(), false);
  for (std::size_t i = 0; i < perm_.size(); ++i) {
    if (perm_[i] >= perm_.size() || seen[perm_[i]])
      throw std::invalid_argument("not a permutation");
    seen[perm_[i]] = true;
    inverse_[perm_[i]] = i;
  }
}

PermutedDataset permute(const Dataset& dataset, std::uint64_t seed) {
  std::vector<std::size_t> perm = random_permutation(dataset.size(), seed);
  Dataset base = dataset.select(perm);
  return PermutedDataset(std::move(base), std::move(perm));
}

}  // namespace deann
