#include "colonnet/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "colonnet/png_io.hpp"

namespace colonnet {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(trim(field));
  // a trailing comma means one more (empty) field
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_coord(const std::string& text, const std::string& id, int row_number) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    COLONNET_CHECK(used == text.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(detail::concat("annotations.csv row ", row_number, " (id '", id,
                        "'): cannot parse coordinate '", text, "'"));
  }
}

struct Annotation {
  int label = 0;
  std::optional<BoundingBox> bbox;
};

std::unordered_map<std::string, Annotation> read_annotations(
    const fs::path& csv_path, const std::vector<std::string>& known_ids) {
  std::unordered_map<std::string, Annotation> annotations;
  if (!fs::is_regular_file(csv_path)) return annotations;

  std::ifstream is(csv_path);
  COLONNET_CHECK(is.good(), "cannot open ", csv_path.string());
  std::string line;
  int row_number = 0;
  bool saw_header = false;
  while (std::getline(is, line)) {
    ++row_number;
    line = trim(line);
    if (line.empty()) continue;
    if (!saw_header) {
      saw_header = true;
      COLONNET_CHECK(split_csv_row(line) ==
                         std::vector<std::string>(
                             {"id", "label", "x_min", "y_min", "x_max", "y_max"}),
                     csv_path.string(),
                     ": expected header 'id,label,x_min,y_min,x_max,y_max', got '",
                     line, "'");
      continue;
    }
    auto fields = split_csv_row(line);
    COLONNET_CHECK(fields.size() == 6, "annotations.csv row ", row_number,
                   ": expected 6 fields, got ", fields.size());
    const std::string& id = fields[0];
    COLONNET_CHECK(std::binary_search(known_ids.begin(), known_ids.end(), id),
                   "annotations.csv row ", row_number, " references unknown image '",
                   id, "'");
    COLONNET_CHECK(!annotations.count(id), "annotations.csv row ", row_number,
                   ": duplicate id '", id, "'");
    Annotation ann;
    COLONNET_CHECK(fields[1] == "0" || fields[1] == "1", "annotations.csv row ",
                   row_number, " (id '", id, "'): label must be 0 or 1, got '",
                   fields[1], "'");
    ann.label = fields[1] == "1" ? 1 : 0;
    const bool has_coords = !fields[2].empty() || !fields[3].empty() ||
                            !fields[4].empty() || !fields[5].empty();
    if (ann.label == 0) {
      COLONNET_CHECK(!has_coords, "annotations.csv row ", row_number, " (id '", id,
                     "'): bbox columns must be empty for label 0");
    } else if (has_coords) {
      BoundingBox box{parse_coord(fields[2], id, row_number),
                      parse_coord(fields[3], id, row_number),
                      parse_coord(fields[4], id, row_number),
                      parse_coord(fields[5], id, row_number)};
      box.validate("annotations.csv id '" + id + "'");
      ann.bbox = box;
    }
    annotations.emplace(id, ann);
  }
  return annotations;
}

}  // namespace

std::vector<ImageSample> load_dataset(const std::string& root_path) {
  const fs::path root(root_path);
  COLONNET_CHECK(fs::is_directory(root), "dataset root is not a directory: ",
                 root_path);
  const fs::path images_dir = root / "images";
  const fs::path masks_dir = root / "masks";

  std::vector<std::string> ids;
  if (fs::is_directory(images_dir)) {
    for (const auto& entry : fs::directory_iterator(images_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") {
        ids.push_back(entry.path().stem().string());
      }
    }
  }
  std::sort(ids.begin(), ids.end());

  const auto annotations = read_annotations(root / "annotations.csv", ids);

  std::vector<ImageSample> samples;
  samples.reserve(ids.size());
  for (const auto& id : ids) {
    ImageSample s;
    s.id = id;
    s.image = read_image_png((images_dir / (id + ".png")).string());
    const fs::path mask_path = masks_dir / (id + ".png");
    if (fs::is_regular_file(mask_path)) {
      MaskTensor mask = read_mask_png(mask_path.string());
      COLONNET_CHECK(mask.dim(0) == s.height() && mask.dim(1) == s.width(),
                     "mask for id '", id, "' is ", mask.dim(0), "x", mask.dim(1),
                     " but the image is ", s.height(), "x", s.width());
      s.mask = std::move(mask);
    }
    if (auto it = annotations.find(id); it != annotations.end()) {
      s.label = it->second.label;
      s.bbox = it->second.bbox;
    }
    s.validate();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace colonnet
