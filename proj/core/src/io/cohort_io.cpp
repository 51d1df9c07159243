// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/io/cohort_io.hpp"

#include <map>
#include <sstream>

#include "json.hpp"
#include "synthgt/error.hpp"
#include "synthgt/io/text.hpp"

namespace synthgt::io {

using nlohmann::json;
using graph::Cohort;
using graph::Modality;

namespace {

std::string feature_header(Modality m) {
  std::ostringstream out;
  out << "id";
  if (m == Modality::kMri) {
    for (std::size_t r = 0; r < graph::kMriNodes; ++r) {
      out << ",r" << r << "_thickness,r" << r << "_volume";
    }
  } else {
    for (std::size_t u = 0; u < graph::kUdsNodes; ++u) out << ",u" << u;
  }
  return out.str();
}

std::string feature_csv(const Cohort& cohort, Modality m, const std::string& hash) {
  std::ostringstream out;
  out << csv_hash_line(hash) << feature_header(m) << '\n';
  for (const auto& s : cohort.subjects) {
    out << s.id;
    for (double v : s.graph(m).features) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

json doubles_json(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

}  // namespace

void write_cohort(const std::filesystem::path& dir, const Cohort& cohort,
                  const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  std::ostringstream subjects;
  subjects << csv_hash_line(config_hash) << "id,label,age,sex,apoe4,site_id\n";
  for (const auto& s : cohort.subjects) {
    graph::validate_subject(s);
    subjects << s.id << ',' << s.label << ',' << format_double(s.age) << ',' << s.sex << ','
             << (s.apoe4 ? 1 : 0) << ',' << s.site << '\n';
  }
  write_file_atomic(dir / "subjects.csv", subjects.str());
  write_file_atomic(dir / "mri.csv", feature_csv(cohort, Modality::kMri, config_hash));
  write_file_atomic(dir / "uds.csv", feature_csv(cohort, Modality::kUds, config_hash));

  json meta;
  meta["format_version"] = kCohortFormatVersion;
  meta["config_hash"] = config_hash;
  meta["provenance"] = graph::provenance_name(cohort.provenance);
  meta["subject_count"] = cohort.size();
  const auto& layout = cohort.schema->mri_layout;
  meta["mri_layout"] = {{"rows", layout.rows}, {"cols", layout.cols}, {"omitted", layout.omitted}};
  meta["mri_topology_id"] = cohort.schema->mri->id();
  meta["uds_domains"] = cohort.schema->uds_domains;
  meta["uds_topology_id"] = cohort.schema->uds->id();
  if (cohort.standardization) {
    const auto& st = *cohort.standardization;
    meta["standardization"] = {{"mri", "per_subject"},
                               {"uds_mean", doubles_json(st.uds_mean)},
                               {"uds_std", doubles_json(st.uds_std)},
                               {"fitted_on", st.fitted_on}};
  } else {
    meta["standardization"] = nullptr;
  }
  write_file_atomic(dir / "cohort.json", meta.dump(2) + "\n");
}

std::string read_cohort_hash(const std::filesystem::path& dir) {
  const json meta = json::parse(read_file(dir / "cohort.json"));
  return meta.value("config_hash", std::string());
}

Cohort read_cohort(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_file(dir / "cohort.json"));
  } catch (const json::exception& e) {
    throw IoError((dir / "cohort.json").string() + ": " + e.what());
  }
  if (meta.value("format_version", 0) != kCohortFormatVersion) {
    throw IoError((dir / "cohort.json").string() + ": unsupported format_version");
  }
  Cohort cohort;
  cohort.provenance = graph::parse_provenance(meta.at("provenance").get<std::string>());
  graph::MriLayout layout;
  layout.rows = meta.at("mri_layout").at("rows").get<std::size_t>();
  layout.cols = meta.at("mri_layout").at("cols").get<std::size_t>();
  layout.omitted = meta.at("mri_layout").at("omitted").get<std::size_t>();
  auto domains = meta.at("uds_domains").get<std::vector<int>>();
  if (layout.rows == graph::MriLayout{}.rows && layout.cols == graph::MriLayout{}.cols &&
      layout.omitted == graph::MriLayout{}.omitted && domains == graph::default_uds_domains()) {
    cohort.schema = graph::CohortSchema::default_schema();
  } else {
    cohort.schema = graph::CohortSchema::make(layout, std::move(domains));
  }
  if (!meta.at("standardization").is_null()) {
    const auto& st = meta.at("standardization");
    graph::Standardization table;
    table.uds_mean = st.at("uds_mean").get<std::vector<double>>();
    table.uds_std = st.at("uds_std").get<std::vector<double>>();
    table.fitted_on = st.value("fitted_on", std::vector<std::string>{});
    cohort.standardization = std::move(table);
  }

  const CsvTable subjects = read_csv(dir / "subjects.csv");
  const std::size_t c_id = subjects.column("id"), c_label = subjects.column("label"),
                    c_age = subjects.column("age"), c_sex = subjects.column("sex"),
                    c_apoe = subjects.column("apoe4"), c_site = subjects.column("site_id");
  std::map<std::string, std::size_t> index;
  for (const auto& row : subjects.rows) {
    graph::Subject s = graph::blank_subject(row[c_id], std::stoi(row[c_label]));
    s.age = parse_double(row[c_age]);
    s.sex = std::stoi(row[c_sex]);
    s.apoe4 = std::stoi(row[c_apoe]) != 0;
    s.site = std::stoi(row[c_site]);
    if (!index.emplace(s.id, cohort.subjects.size()).second) {
      throw IoError("duplicate subject id '" + s.id + "'");
    }
    cohort.subjects.push_back(std::move(s));
  }

  for (Modality m : {Modality::kMri, Modality::kUds}) {
    const auto file = dir / (std::string(graph::modality_name(m)) + ".csv");
    const CsvTable table = read_csv(file);
    const auto expected = split_csv_line(feature_header(m)).size();
    if (table.header.size() != expected) {
      throw IoError(file.string() + ": expected " + std::to_string(expected) + " columns");
    }
    if (table.rows.size() != cohort.size()) {
      throw IoError(file.string() + ": " + std::to_string(table.rows.size()) + " rows for " +
                    std::to_string(cohort.size()) + " subjects");
    }
    for (const auto& row : table.rows) {
      auto it = index.find(row[0]);
      if (it == index.end()) throw IoError(file.string() + ": unknown subject '" + row[0] + "'");
      auto& features = cohort.subjects[it->second].graph(m).features;
      for (std::size_t j = 1; j < row.size(); ++j) features[j - 1] = parse_double(row[j]);
    }
  }
  return cohort;
}

}  // namespace synthgt::io
