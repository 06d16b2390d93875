#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

namespace xshot::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "xshot") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  std::string content;
  for (const auto& r : records) content += r.dump() + "\n";
  write_file(path, content);
}

/// Writes manifest.json next to one JSONL file per split.
inline std::filesystem::path write_task(const std::filesystem::path& dir, nlohmann::json manifest,
                                        const std::map<std::string, std::vector<nlohmann::json>>& splits) {
  nlohmann::json split_paths = nlohmann::json::object();
  for (const auto& [name, records] : splits) {
    write_jsonl(dir / (name + ".jsonl"), records);
    split_paths[name] = name + ".jsonl";
  }
  manifest["splits"] = split_paths;
  write_file(dir / "manifest.json", manifest.dump(2));
  return dir / "manifest.json";
}

inline void write_template(const std::filesystem::path& dir, const std::string& task, const std::string& lang,
                           nlohmann::json patterns, nlohmann::json verbalizer) {
  nlohmann::json desc{{"task", task}, {"language", lang}, {"patterns", patterns}, {"verbalizer", verbalizer}};
  write_file(dir / (task + "-" + lang + ".json"), desc.dump(2));
}

}  // namespace xshot::testing
