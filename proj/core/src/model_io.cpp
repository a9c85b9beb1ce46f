#include <fstream>

#include "json.hpp"
#include "ubpod/balpod.hpp"
#include "ubpod/io.hpp"

namespace ubpod {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json weight_record(const InnerProductWeight& w, const fs::path& dir,
                   const std::string& stem) {
  json j;
  j["size"] = w.size();
  if (w.is_identity()) {
    j["kind"] = "identity";
  } else if (w.is_diagonal()) {
    j["kind"] = "diagonal";
    write_matrix(dir / (stem + ".txt"), Matrix(w.dense().diagonal()));
  } else {
    j["kind"] = "dense";
    write_matrix(dir / (stem + ".txt"), w.dense());
  }
  return j;
}

InnerProductWeight read_weight(const json& j, const fs::path& dir,
                               const std::string& stem) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") {
    return InnerProductWeight::Identity(j.at("size").get<int>());
  }
  const Matrix m = read_matrix(dir / (stem + ".txt"));
  if (kind == "diagonal") return InnerProductWeight::Diagonal(m.col(0));
  if (kind == "dense") return InnerProductWeight::Dense(m);
  throw ValidationError("load_model: unknown weight kind '" + kind + "'");
}

struct Block {
  const char* name;
  Matrix ReducedModel::*member;
};

constexpr Block kBlocks[] = {
    {"a_u", &ReducedModel::a_u},       {"a_s", &ReducedModel::a_s},
    {"b_u", &ReducedModel::b_u},       {"b_s", &ReducedModel::b_s},
    {"c_u", &ReducedModel::c_u},       {"c_s", &ReducedModel::c_s},
    {"chat_s", &ReducedModel::chat_s}, {"coefficient_map", &ReducedModel::coefficient_map},
    {"phi_u", &ReducedModel::phi_u},   {"psi_u", &ReducedModel::psi_u},
    {"phi_s", &ReducedModel::phi_s},   {"psi_s", &ReducedModel::psi_s},
};

}  // namespace

void save_model(const ReducedModel& model, const fs::path& dir) {
  fs::create_directories(dir);
  json meta;
  for (const Block& b : kBlocks) {
    write_matrix(dir / (std::string(b.name) + ".txt"), model.*(b.member));
  }
  write_matrix(dir / "hsv.txt", Matrix(model.hsv));
  meta["n_u"] = model.n_u();
  meta["r"] = model.r();
  meta["states"] = model.states();
  meta["inputs"] = model.inputs();
  meta["cross_su"] = model.cross_su;
  meta["cross_us"] = model.cross_us;
  meta["hsv"] = std::vector<double>(model.hsv.data(),
                                    model.hsv.data() + model.hsv.size());
  meta["weight"] = weight_record(model.W, dir, "weight");
  meta["output_weight"] =
      weight_record(model.output_weight, dir, "output_weight");
  meta["provenance"] = model.provenance;
  meta["hash"] = hex_digest(model_hash(model));
  std::ofstream out(dir / "model.json");
  if (!out) throw ValidationError("save_model: cannot write " + dir.string());
  out << meta.dump(2) << '\n';
}

ReducedModel load_model(const fs::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) {
    throw ValidationError("load_model: no model.json in " + dir.string());
  }
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("load_model: malformed model.json: ") +
                          e.what());
  }
  ReducedModel model;
  for (const Block& b : kBlocks) {
    model.*(b.member) = read_matrix(dir / (std::string(b.name) + ".txt"));
  }
  model.hsv = read_matrix(dir / "hsv.txt").col(0);
  model.cross_su = meta.at("cross_su").get<double>();
  model.cross_us = meta.at("cross_us").get<double>();
  model.W = read_weight(meta.at("weight"), dir, "weight");
  model.output_weight =
      read_weight(meta.at("output_weight"), dir, "output_weight");
  model.provenance =
      meta.at("provenance").get<std::map<std::string, std::string>>();
  if (meta.at("hash").get<std::string>() != hex_digest(model_hash(model))) {
    throw ValidationError("load_model: content hash mismatch in " +
                          dir.string());
  }
  return model;
}

}  // namespace ubpod
