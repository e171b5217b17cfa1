#include "c3/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace c3 {

namespace {
constexpr const char* kFormat = "c3-checkpoint";
constexpr int kVersion = 1;
}  // namespace

std::string checkpoint_to_json(const ModelParams& params) {
  using nlohmann::json;
  const ModelDims& d = params.dims;
  json root = {{"format", kFormat},
               {"version", kVersion},
               {"dims",
                {{"input", d.input},
                 {"encoder_hidden", d.encoder_hidden},
                 {"instance_hidden", d.instance_hidden},
                 {"z_dim", d.z_dim},
                 {"cluster_hidden", d.cluster_hidden},
                 {"clusters", d.clusters}}}};
  json blocks = json::array();
  for (const auto& b : params.blocks()) {
    const Matrix& m = *b.value;
    blocks.push_back({{"name", b.name},
                      {"rows", m.rows()},
                      {"cols", m.cols()},
                      {"data", std::vector<double>(m.data(), m.data() + m.size())}});
  }
  root["blocks"] = std::move(blocks);
  return root.dump();
}

ModelParams checkpoint_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const json root = json::parse(text);
    if (root.value("format", "") != kFormat) throw Error("checkpoint: unrecognized format");
    if (root.value("version", 0) != kVersion)
      throw Error("checkpoint: unsupported version " + root.value("version", json()).dump());
    const json& jd = root.at("dims");
    ModelDims dims;
    dims.input = jd.at("input").get<int>();
    dims.encoder_hidden = jd.at("encoder_hidden").get<std::vector<int>>();
    dims.instance_hidden = jd.at("instance_hidden").get<std::vector<int>>();
    dims.z_dim = jd.at("z_dim").get<int>();
    dims.cluster_hidden = jd.at("cluster_hidden").get<std::vector<int>>();
    dims.clusters = jd.at("clusters").get<int>();

    ModelParams params = init_params(0, dims).zeros_like();
    auto blocks = params.blocks();
    const json& jb = root.at("blocks");
    if (jb.size() != blocks.size())
      throw Error("checkpoint: expected " + std::to_string(blocks.size()) + " blocks, found " +
                  std::to_string(jb.size()));
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const json& b = jb[i];
      Matrix& dst = *blocks[i].value;
      if (b.at("name").get<std::string>() != blocks[i].name ||
          b.at("rows").get<Eigen::Index>() != dst.rows() ||
          b.at("cols").get<Eigen::Index>() != dst.cols())
        throw Error("checkpoint: block " + std::to_string(i) + " does not match dims (" +
                    blocks[i].name + ")");
      const auto data = b.at("data").get<std::vector<double>>();
      if (data.size() != static_cast<std::size_t>(dst.size()))
        throw Error("checkpoint: block " + blocks[i].name + " has wrong element count");
      std::copy(data.begin(), data.end(), dst.data());
    }
    return params;
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace c3
