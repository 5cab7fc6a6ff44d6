#include <bit>
#include <fstream>
#include <iterator>
#include <map>

#include "cxr/error.hpp"
#include "cxr/nn/checkpoint.hpp"

namespace cxr::nn {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) fail_data("truncated checkpoint");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Parameters& params) {
  std::vector<std::uint8_t> out = {'C', 'K', 'P', 'T'};
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.text(4) != "CKPT") fail_data("not a checkpoint file");
  const auto version = r.uint(4);
  if (version != 1) fail_data("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.uint(4);
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.text(r.uint(4));
    const auto ndim = r.uint(4);
    std::vector<std::size_t> shape;
    for (std::uint64_t d = 0; d < ndim; ++d) shape.push_back(r.uint(4));
    std::vector<double> values(shape_product(shape));
    for (double& v : values) v = std::bit_cast<double>(r.uint(8));
    t.value = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(t));
  }
  if (!r.done()) fail_data("trailing bytes after checkpoint");
  return out;
}

void save_checkpoint(const Parameters& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_data("cannot write " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

std::size_t import_parameters(Parameters& params, std::span<const NamedTensor> tensors,
                              bool require_all) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  std::size_t copied = 0;
  for (Parameter& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      if (require_all) fail_data("checkpoint lacks tensor " + p.name);
      continue;
    }
    if (it->second->shape() != p.value.shape()) fail_data("checkpoint shape mismatch for " + p.name);
    p.value = *it->second;
    ++copied;
  }
  return copied;
}

}  // namespace cxr::nn
