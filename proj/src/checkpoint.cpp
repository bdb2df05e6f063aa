#include "leadq/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "leadq/errors.hpp"

namespace leadq {
namespace {

constexpr char kMagic[4] = {'L', 'Q', 'C', 'K'};
constexpr uint32_t kBinaryVersion = 1;

void append_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void append_u32(std::string& out, uint32_t v) { append_bytes(out, &v, 4); }
void append_u64(std::string& out, uint64_t v) { append_bytes(out, &v, 8); }

}  // namespace

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open for write: " + tmp);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.flush();
    if (!f) throw CheckpointError("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw CheckpointError("rename failed: " + path);
  }
}

void SectionWriter::add(const std::string& name, const double* data, size_t n) {
  sections_.emplace_back(name, std::vector<double>(data, data + n));
}

void SectionWriter::add(const std::string& name, const std::vector<double>& v) {
  sections_.emplace_back(name, v);
}

void SectionWriter::add_scalar(const std::string& name, double v) {
  sections_.emplace_back(name, std::vector<double>{v});
}

void SectionWriter::commit(const std::string& path) const {
  std::string out;
  append_bytes(out, kMagic, 4);
  append_u32(out, kBinaryVersion);
  append_u64(out, sections_.size());
  for (const auto& [name, data] : sections_) {
    append_u32(out, static_cast<uint32_t>(name.size()));
    append_bytes(out, name.data(), name.size());
    append_u64(out, data.size());
    append_bytes(out, data.data(), data.size() * sizeof(double));
  }
  atomic_write_file(path, out);
}

SectionReader::SectionReader(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());

  size_t pos = 0;
  auto need = [&](size_t n) {
    if (pos + n > buf.size()) {
      throw CheckpointError("truncated checkpoint: " + path);
    }
  };
  need(4 + 4 + 8);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw CheckpointError("bad checkpoint magic: " + path);
  }
  pos = 4;
  uint32_t version = 0;
  std::memcpy(&version, buf.data() + pos, 4);
  pos += 4;
  if (version != kBinaryVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  uint64_t n_sections = 0;
  std::memcpy(&n_sections, buf.data() + pos, 8);
  pos += 8;
  for (uint64_t i = 0; i < n_sections; ++i) {
    need(4);
    uint32_t name_len = 0;
    std::memcpy(&name_len, buf.data() + pos, 4);
    pos += 4;
    need(name_len);
    std::string name(buf.data() + pos, name_len);
    pos += name_len;
    need(8);
    uint64_t count = 0;
    std::memcpy(&count, buf.data() + pos, 8);
    pos += 8;
    need(count * sizeof(double));
    std::vector<double> data(count);
    if (count > 0) {
      std::memcpy(data.data(), buf.data() + pos, count * sizeof(double));
    }
    pos += count * sizeof(double);
    if (!sections_.emplace(name, std::move(data)).second) {
      throw CheckpointError("duplicate checkpoint section '" + name + "'");
    }
  }
}

bool SectionReader::has(const std::string& name) const {
  return sections_.count(name) != 0;
}

const std::vector<double>& SectionReader::get(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) {
    throw CheckpointError("missing checkpoint section '" + name + "'");
  }
  return it->second;
}

double SectionReader::get_scalar(const std::string& name) const {
  const auto& v = get(name);
  if (v.size() != 1) {
    throw CheckpointError("section '" + name + "' is not a scalar");
  }
  return v[0];
}

void write_manifest(const std::string& path, const CheckpointManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["round"] = m.round;
  j["policy"] = m.policy;
  j["csv_rows"] = m.csv_rows;
  j["finished"] = m.finished;
  j["config"] = m.config_text;
  atomic_write_file(path, j.dump(2) + "\n");
}

CheckpointManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CheckpointError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw CheckpointError("malformed manifest " + path + ": " + e.what());
  }
  CheckpointManifest m;
  try {
    m.version = j.at("version").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.round = j.at("round").get<int>();
    m.policy = j.at("policy").get<std::string>();
    m.csv_rows = j.at("csv_rows").get<long>();
    m.finished = j.at("finished").get<bool>();
    m.config_text = j.at("config").get<std::string>();
  } catch (const std::exception& e) {
    throw CheckpointError("manifest missing field in " + path + ": " +
                          e.what());
  }
  if (m.version != 1) {
    throw CheckpointError("unsupported manifest version " +
                          std::to_string(m.version));
  }
  return m;
}

}  // namespace leadq
