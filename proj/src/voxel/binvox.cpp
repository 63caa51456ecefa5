#include "voxtr/voxel/binvox.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "voxtr/core/errors.hpp"

namespace voxtr {

namespace {

// Pulls one header line (up to '\n', which is consumed but not returned).
std::string next_line(const std::vector<uint8_t>& bytes, size_t& pos) {
  std::string line;
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos++]);
    if (c == '\n') return line;
    line.push_back(c);
  }
  throw BinvoxFormatError("header ended before \"data\" line");
}

// File cell order: y fastest, then z, then x.
long file_to_grid_index(long f, long n) {
  const long x = f / (n * n);
  const long z = (f / n) % n;
  const long y = f % n;
  return (x * n + y) * n + z;
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

VoxelGrid read_binvox(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  const std::string magic = next_line(bytes, pos);
  if (magic != "#binvox 1") throw BinvoxFormatError("bad magic line \"" + magic + "\"");

  long n = -1;
  std::array<double, 3> translate{0.0, 0.0, 0.0};
  double scale = 1.0;
  bool saw_data = false;
  while (!saw_data) {
    const std::string line = next_line(bytes, pos);
    std::istringstream in(line);
    std::string key;
    in >> key;
    if (key == "data") {
      saw_data = true;
    } else if (key == "dim") {
      long a = 0, b = 0, c = 0;
      if (!(in >> a >> b >> c) || a <= 0) throw BinvoxFormatError("bad dim line \"" + line + "\"");
      if (a != b || b != c) throw BinvoxFormatError("non-cubic dim line \"" + line + "\"");
      n = a;
    } else if (key == "translate") {
      if (!(in >> translate[0] >> translate[1] >> translate[2])) {
        throw BinvoxFormatError("bad translate line \"" + line + "\"");
      }
    } else if (key == "scale") {
      if (!(in >> scale) || scale <= 0.0) throw BinvoxFormatError("bad scale line \"" + line + "\"");
    } else {
      throw BinvoxFormatError("unexpected header line \"" + line + "\"");
    }
  }
  if (n < 0) throw BinvoxFormatError("header has no dim line");

  VoxelGrid grid(n);
  grid.translate = translate;
  grid.scale = scale;
  const long total = grid.num_cells();
  long filled = 0;
  while (pos < bytes.size()) {
    const uint8_t value = bytes[pos++];
    if (pos >= bytes.size()) {
      throw BinvoxTruncationError("payload ends mid-pair after " + std::to_string(filled) + " cells");
    }
    const uint8_t count = bytes[pos++];
    if (value > 1) throw BinvoxFormatError("rle value byte " + std::to_string(int(value)) + " (want 0 or 1)");
    if (filled + count > total) {
      throw BinvoxTruncationError("payload expands past " + std::to_string(total) + " cells");
    }
    if (value) {
      for (long i = 0; i < count; ++i) {
        grid.occupancy()[static_cast<size_t>(file_to_grid_index(filled + i, n))] = 1;
      }
    }
    filled += count;
  }
  if (filled != total) {
    throw BinvoxTruncationError("payload expands to " + std::to_string(filled) + " cells, want " +
                                std::to_string(total));
  }
  return grid;
}

std::vector<uint8_t> write_binvox(const VoxelGrid& grid) {
  const long n = grid.resolution();
  std::string header = "#binvox 1\n";
  header += "dim " + std::to_string(n) + " " + std::to_string(n) + " " + std::to_string(n) + "\n";
  header += "translate " + fmt_real(grid.translate[0]) + " " + fmt_real(grid.translate[1]) + " " +
            fmt_real(grid.translate[2]) + "\n";
  header += "scale " + fmt_real(grid.scale) + "\n";
  header += "data\n";

  std::vector<uint8_t> out(header.begin(), header.end());
  const long total = grid.num_cells();
  long f = 0;
  while (f < total) {
    const uint8_t value = grid.occupancy()[static_cast<size_t>(file_to_grid_index(f, n))];
    long run = 1;
    while (f + run < total && run < 255 &&
           grid.occupancy()[static_cast<size_t>(file_to_grid_index(f + run, n))] == value) {
      ++run;
    }
    out.push_back(value);
    out.push_back(static_cast<uint8_t>(run));
    f += run;
  }
  return out;
}

VoxelGrid read_binvox_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_binvox(bytes);
}

void write_binvox_file(const VoxelGrid& grid, const std::string& path) {
  const std::vector<uint8_t> bytes = write_binvox(grid);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      std::filesystem::remove(tmp);
      throw IoError("failed writing " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("failed renaming " + tmp + " to " + path + ": " + ec.message());
  }
}

}  // namespace voxtr
