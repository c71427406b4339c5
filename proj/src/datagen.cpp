#include "relstab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"
#include "relstab/keyvalue.hpp"
#include "relstab/pgm.hpp"
#include "relstab/rng.hpp"

namespace relstab {

void Dataset::validate() const {
  if (labels.size() != images.size() || ids.size() != images.size() ||
      (!masks.empty() && masks.size() != images.size()))
    throw InputError("dataset fields have inconsistent lengths");
  for (int label : labels)
    if (label != 0 && label != 1)
      throw InputError("label " + std::to_string(label) + " not in {0,1}");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.images.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size())
      throw InputError("subset index " + std::to_string(i) + " out of range");
    out.images.push_back(images[i]);
    out.labels.push_back(labels[i]);
    out.ids.push_back(ids[i]);
    if (has_masks()) out.masks.push_back(masks[i]);
  }
  return out;
}

namespace {

bool inside_ellipse(const SyntheticSpec& s, double y, double x) {
  const double dy = (y - s.center_y) / s.semi_y;
  const double dx = (x - s.center_x) / s.semi_x;
  return dy * dy + dx * dx <= 1.0;
}

// Field table shared by to_text/from_text.
struct Field {
  const char* key;
  std::function<std::string(const SyntheticSpec&)> get;
  std::function<void(SyntheticSpec&, const std::string&)> set;
};

template <typename T>
Field number_field(const char* key, T SyntheticSpec::*member) {
  return {key,
          [member](const SyntheticSpec& s) { return format_number(s.*member); },
          [key, member](SyntheticSpec& s, const std::string& v) {
            s.*member = parse_number<T>(key, v);
          }};
}

const std::vector<Field>& spec_fields() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(number_field("side", &SyntheticSpec::side));
    f.push_back({"count_class0",
                 [](const SyntheticSpec& s) { return format_number(s.class_counts[0]); },
                 [](SyntheticSpec& s, const std::string& v) {
                   s.class_counts[0] = parse_number<std::size_t>("count_class0", v);
                 }});
    f.push_back({"count_class1",
                 [](const SyntheticSpec& s) { return format_number(s.class_counts[1]); },
                 [](SyntheticSpec& s, const std::string& v) {
                   s.class_counts[1] = parse_number<std::size_t>("count_class1", v);
                 }});
    f.push_back(number_field("center_y", &SyntheticSpec::center_y));
    f.push_back(number_field("center_x", &SyntheticSpec::center_x));
    f.push_back(number_field("semi_y", &SyntheticSpec::semi_y));
    f.push_back(number_field("semi_x", &SyntheticSpec::semi_x));
    f.push_back(number_field("base_intensity", &SyntheticSpec::base_intensity));
    f.push_back(number_field("base_jitter", &SyntheticSpec::base_jitter));
    f.push_back(number_field("blob_offset_x", &SyntheticSpec::blob_offset_x));
    f.push_back(number_field("blob_offset_y", &SyntheticSpec::blob_offset_y));
    f.push_back(number_field("blob_radius", &SyntheticSpec::blob_radius));
    f.push_back(number_field("blob_delta", &SyntheticSpec::blob_delta));
    f.push_back(number_field("blob_jitter", &SyntheticSpec::blob_jitter));
    f.push_back(number_field("noise_sigma", &SyntheticSpec::noise_sigma));
    f.push_back(number_field("seed", &SyntheticSpec::seed));
    return f;
  }();
  return fields;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (side < 8) throw ConfigError("side must be >= 8");
  if (class_counts[0] < 1 || class_counts[1] < 1)
    throw ConfigError("each class needs at least one image");
  if (semi_y <= 0 || semi_x <= 0) throw ConfigError("ellipse semi-axes must be > 0");
  if (base_intensity < 0 || base_intensity + base_jitter + blob_delta > 1.0 ||
      base_intensity - base_jitter < 0)
    throw ConfigError("base intensity, jitter and blob delta must stay in [0,1]");
  if (blob_radius <= 0 || blob_delta < 0 || blob_jitter < 0 || noise_sigma < 0 ||
      base_jitter < 0)
    throw ConfigError("blob radius must be > 0 and deltas/jitters/noise >= 0");
  // The ellipse is convex, so containing the bounding box of every possible
  // disk placement is sufficient.
  const double reach_x = std::abs(blob_offset_x) + blob_jitter + blob_radius;
  const double reach_y = std::abs(blob_offset_y) + blob_jitter + blob_radius;
  for (double sy : {-1.0, 1.0})
    for (double sx : {-1.0, 1.0})
      if (!inside_ellipse(*this, center_y + sy * reach_y, center_x + sx * reach_x))
        throw ConfigError("blob can extend outside the brain ellipse");
  if (center_y - semi_y < 0 || center_x - semi_x < 0 ||
      center_y + semi_y > static_cast<double>(side - 1) ||
      center_x + semi_x > static_cast<double>(side - 1))
    throw ConfigError("brain ellipse does not fit in the image");
}

std::string SyntheticSpec::to_text() const {
  std::string out;
  for (const Field& f : spec_fields())
    out += std::string(f.key) + "=" + f.get(*this) + "\n";
  return out;
}

SyntheticSpec SyntheticSpec::from_text(const std::string& text) {
  SyntheticSpec spec;
  for (const auto& [key, value] : parse_key_values(text)) {
    const auto& fields = spec_fields();
    auto it = std::find_if(fields.begin(), fields.end(),
                           [&](const Field& f) { return key == f.key; });
    if (it == fields.end()) throw ConfigError("unknown spec key '" + key + "'");
    it->set(spec, value);
  }
  return spec;
}

Dataset generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.class_counts[0] + spec.class_counts[1];
  const std::size_t side = spec.side;
  Dataset d;
  d.images.reserve(n);
  d.masks.reserve(n);

  Tensor mask({1, side, side});
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      mask[y * side + x] = inside_ellipse(spec, static_cast<double>(y),
                                          static_cast<double>(x))
                               ? 1.0f
                               : 0.0f;

  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < spec.class_counts[0] ? 0 : 1;
    Rng rng(spec.seed ^ static_cast<std::uint64_t>(i));
    const double base =
        spec.base_intensity + spec.base_jitter * (2.0 * rng.uniform() - 1.0);
    const double side_sign = label == 0 ? -1.0 : 1.0;
    const double by = spec.center_y + spec.blob_offset_y +
                      spec.blob_jitter * (2.0 * rng.uniform() - 1.0);
    const double bx = spec.center_x + side_sign * spec.blob_offset_x +
                      spec.blob_jitter * (2.0 * rng.uniform() - 1.0);
    const double r2 = spec.blob_radius * spec.blob_radius;

    Tensor img({1, side, side});
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const double fy = static_cast<double>(y), fx = static_cast<double>(x);
        double v = 0.0;
        if (mask[y * side + x] > 0.0f) {
          v = base;
          if ((fy - by) * (fy - by) + (fx - bx) * (fx - bx) <= r2)
            v += spec.blob_delta;
        }
        v += spec.noise_sigma * rng.normal();
        img[y * side + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    d.images.push_back(std::move(img));
    d.labels.push_back(label);
    d.ids.push_back(i);
    d.masks.push_back(mask);
  }
  return d;
}

Split split_train_val(const Dataset& dataset, double ratio, std::uint64_t seed) {
  dataset.validate();
  if (!(ratio > 0.0 && ratio < 1.0))
    throw InputError("split ratio must lie in (0,1)");
  std::vector<bool> in_train(dataset.size(), false);
  Rng rng(seed);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (dataset.labels[i] == cls) members.push_back(i);
    if (members.size() < 2)
      throw InputError("class " + std::to_string(cls) + " has " +
                       std::to_string(members.size()) +
                       " items; stratified split needs at least 2");
    for (std::size_t j = members.size() - 1; j > 0; --j)
      std::swap(members[j], members[rng.below(j + 1)]);
    auto take = static_cast<std::size_t>(
        std::lround(ratio * static_cast<double>(members.size())));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    for (std::size_t j = 0; j < take; ++j) in_train[members[j]] = true;
  }
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    (in_train[i] ? train_idx : val_idx).push_back(i);
  return {dataset.subset(train_idx), dataset.subset(val_idx)};
}

std::string corpus_image_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.pgm", id);
  return buf;
}

void save_corpus(const std::filesystem::path& dir, const Dataset& dataset,
                 const SyntheticSpec& spec) {
  dataset.validate();
  std::string labels = "id,label\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::string name = corpus_image_name(dataset.ids[i]);
    save_pgm(dir / "images" / name, dataset.images[i]);
    if (dataset.has_masks()) save_pgm(dir / "masks" / name, dataset.masks[i]);
    labels += std::to_string(dataset.ids[i]) + "," +
              std::to_string(dataset.labels[i]) + "\n";
  }
  write_file_atomic(dir / "spec.txt", spec.to_text());
  write_file_atomic(dir / "labels.csv", labels);
}

Dataset load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("corpus directory " + dir.string() + " does not exist");
  std::istringstream in(read_file(dir / "labels.csv"));
  std::string line;
  if (!std::getline(in, line) || line != "id,label")
    throw IoError(dir.string() + "/labels.csv: missing 'id,label' header");
  Dataset d;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw IoError("labels.csv: malformed row '" + line + "'");
    const std::size_t id = parse_number<std::size_t>("id", line.substr(0, comma));
    const int label = parse_number<int>("label", line.substr(comma + 1));
    const std::string name = corpus_image_name(id);
    d.images.push_back(load_pgm(dir / "images" / name));
    d.ids.push_back(id);
    d.labels.push_back(label);
    if (std::filesystem::exists(dir / "masks" / name))
      d.masks.push_back(load_pgm(dir / "masks" / name));
  }
  if (!d.masks.empty() && d.masks.size() != d.images.size())
    throw IoError(dir.string() + ": masks present for only some images");
  d.validate();
  return d;
}

}  // namespace relstab
