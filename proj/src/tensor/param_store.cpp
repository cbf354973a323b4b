#include "wasr/param_store.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "wasr/error.hpp"

namespace wasr {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (name.empty()) throw ContractError("parameter name must be non-empty");
  if (entries_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  if (!t.defined()) throw ContractError("parameter '" + name + "' is undefined");
  t.set_requires_grad(trainable_);
  order_.push_back(name);
  return entries_.emplace(name, std::move(t)).first->second;
}

bool ParamStore::contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

Tensor& ParamStore::at(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("no parameter named '" + std::string(name) + "'");
  return it->second;
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("no parameter named '" + std::string(name) + "'");
  return it->second;
}

std::int64_t ParamStore::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out(trainable_);
  for (const auto& name : order_) out.add(name, at(name).detach());
  return out;
}

bool ParamStore::bit_equal(const ParamStore& other) const {
  if (order_ != other.order_) return false;
  for (const auto& name : order_) {
    const auto& a = at(name);
    const auto& b = other.at(name);
    if (a.shape() != b.shape()) return false;
    if (std::memcmp(a.data().data(), b.data().data(), a.data().size_bytes()) != 0) return false;
  }
  return true;
}

namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  const auto off = is.tellg();
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError(path.string() + ": truncated at offset " + std::to_string(static_cast<long long>(off)));
  }
  return v;
}

}  // namespace

void ParamStore::save(const std::filesystem::path& path, std::string_view magic) const {
  if (magic.size() != 8) throw ContractError("store magic must be 8 bytes");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  for (const auto& name : order_) {
    const auto& t = at(name);
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.data().size_bytes()));
  }
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

ParamStore ParamStore::load(const std::filesystem::path& path, bool trainable, std::string_view magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::string head(8, '\0');
  if (!is.read(head.data(), 8) || head != magic) {
    throw DataError(path.string() + ": bad magic at offset 0 (expected " + std::string(magic) + ")");
  }
  ParamStore store(trainable);
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t len = get_u32(is, path);
    if (len == 0 || len > 4096) {
      throw DataError(path.string() + ": implausible name length " + std::to_string(len) + " at offset " +
                      std::to_string(static_cast<long long>(is.tellg()) - 4));
    }
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DataError(path.string() + ": truncated name");
    const std::uint32_t rank = get_u32(is, path);
    if (rank > 8) throw DataError(path.string() + ": implausible rank for '" + name + "'");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(get_u32(is, path)));
    std::vector<double> values(static_cast<std::size_t>(shape_numel(shape)));
    const auto off = is.tellg();
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw DataError(path.string() + ": truncated values for '" + name + "' at offset " +
                      std::to_string(static_cast<long long>(off)));
    }
    store.add(name, Tensor(std::move(shape), std::move(values)));
  }
  return store;
}

}  // namespace wasr
