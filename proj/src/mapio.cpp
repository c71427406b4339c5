#include "relstab/mapio.hpp"

#include <algorithm>
#include <cmath>

#include "relstab/csv.hpp"
#include "relstab/errors.hpp"
#include "relstab/fileio.hpp"
#include "relstab/keyvalue.hpp"
#include "relstab/pgm.hpp"

namespace relstab {

namespace {
std::filesystem::path with_ext(std::filesystem::path base, const char* ext) {
  base += ext;
  return base;
}
}  // namespace

void save_scaled_map(const std::filesystem::path& base, const Tensor& values,
                     MapSidecar sidecar) {
  const Shape& s = values.shape();
  if (!(s.size() == 2 || (s.size() == 3 && s[0] == 1)))
    throw InputError("scaled maps must be [H,W], got " + shape_string(s));
  const auto [lo, hi] =
      std::minmax_element(values.values().begin(), values.values().end());
  sidecar.min = *lo;
  sidecar.max = *hi;
  Pgm16 img;
  img.height = s[s.size() - 2];
  img.width = s[s.size() - 1];
  img.samples.resize(values.size());
  const double range = sidecar.max - sidecar.min;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double q = range > 0.0 ? (values[i] - sidecar.min) / range : 0.0;
    img.samples[i] = static_cast<std::uint16_t>(std::lround(q * 65535.0));
  }
  write_pgm16(with_ext(base, ".pgm"), img);
  write_file_atomic(with_ext(base, ".csv"),
                    "min,max,explainer,target,seed\n" +
                        format_number(sidecar.min) + "," +
                        format_number(sidecar.max) + "," + sidecar.explainer +
                        "," + std::to_string(sidecar.target) + "," +
                        std::to_string(sidecar.seed) + "\n");
}

ScaledMap load_scaled_map(const std::filesystem::path& base) {
  const CsvTable table = parse_csv(read_file(with_ext(base, ".csv")));
  if (table.rows.size() != 1)
    throw IoError(with_ext(base, ".csv").string() + ": expected one data row");
  ScaledMap out;
  out.sidecar.min = parse_number<double>("min", table.cell(0, "min"));
  out.sidecar.max = parse_number<double>("max", table.cell(0, "max"));
  out.sidecar.explainer = table.cell(0, "explainer");
  out.sidecar.target = parse_number<int>("target", table.cell(0, "target"));
  out.sidecar.seed = parse_number<std::uint64_t>("seed", table.cell(0, "seed"));
  const Pgm16 img = read_pgm16(with_ext(base, ".pgm"));
  out.values = Tensor({img.height, img.width});
  const double range = out.sidecar.max - out.sidecar.min;
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    out.values[i] = static_cast<float>(out.sidecar.min +
                                       range * (img.samples[i] / 65535.0));
  return out;
}

}  // namespace relstab
