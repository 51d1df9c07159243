// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "synthgt/io/predictions_io.hpp"

#include <sstream>

#include "synthgt/error.hpp"
#include "synthgt/io/text.hpp"

namespace synthgt::io {

void write_predictions(const std::filesystem::path& path, const eval::PredictionSet& preds,
                       const std::string& config_hash) {
  std::ostringstream out;
  out << csv_hash_line(config_hash);
  out << "subject_id,label,prob_ad,fold,age,sex,apoe4\n";
  for (const eval::Prediction& p : preds.items) {
    out << p.id << ',' << p.label << ',' << format_double(p.probability) << ',' << p.fold << ','
        << format_double(p.age) << ',' << p.sex << ',' << (p.apoe4 ? 1 : 0) << '\n';
  }
  write_file_atomic(path, out.str());
}

eval::PredictionSet read_predictions(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t id = t.column("subject_id"), label = t.column("label"), prob = t.column("prob_ad"),
                    fold = t.column("fold"), age = t.column("age"), sex = t.column("sex"),
                    apoe4 = t.column("apoe4");
  eval::PredictionSet s{path.stem().string(), {}};
  auto integer = [&](const std::string& field, std::size_t row) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
      return v;
    } catch (const std::exception&) {
      throw IoError(path.string() + ": row " + std::to_string(row + 1) + ": bad integer '" + field + "'");
    }
  };
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    eval::Prediction p;
    p.id = row[id];
    p.label = integer(row[label], r);
    p.probability = parse_double(row[prob]);
    p.fold = integer(row[fold], r);
    p.age = parse_double(row[age]);
    p.sex = integer(row[sex], r);
    p.apoe4 = integer(row[apoe4], r) != 0;
    if (p.label != 0 && p.label != 1) {
      throw IoError(path.string() + ": row " + std::to_string(r + 1) + ": label must be 0 or 1");
    }
    s.items.push_back(std::move(p));
  }
  return s;
}

}  // namespace synthgt::io
