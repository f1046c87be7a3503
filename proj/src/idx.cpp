#include "scaledet/idx.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace scaledet {

namespace {

[[noreturn]] void fail(const std::string& path, std::size_t offset,
                       const std::string& what) {
  std::ostringstream os;
  os << path << ": " << what << " at byte offset " << offset;
  throw std::runtime_error(os.str());
}

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_u32(const std::vector<unsigned char>& buf,
                       const std::string& path, std::size_t offset) {
  if (offset + 4 > buf.size())
    fail(path, buf.size(), "truncated file, expected 4 more header bytes");
  return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
         (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::string hex32(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s.push_back(digits[(v >> shift) & 0xf]);
  return s;
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::vector<unsigned char> img = read_all(images_path);
  std::uint32_t magic = read_u32(img, images_path, 0);
  if (magic != 0x00000803u)
    fail(images_path, 0, "expected rank-3 image magic 0x00000803, got " + hex32(magic));
  std::uint32_t count = read_u32(img, images_path, 4);
  std::uint32_t rows = read_u32(img, images_path, 8);
  std::uint32_t cols = read_u32(img, images_path, 12);
  if (rows == 0 || cols == 0) fail(images_path, 8, "zero image dimension");
  std::size_t payload = std::size_t(count) * rows * cols;
  if (16 + payload != img.size()) {
    std::ostringstream os;
    os << "expected " << payload << " payload bytes for " << count << "x" << rows
       << "x" << cols << " but file holds " << (img.size() - 16);
    fail(images_path, 16, os.str());
  }

  std::vector<unsigned char> lab = read_all(labels_path);
  std::uint32_t lmagic = read_u32(lab, labels_path, 0);
  if (lmagic != 0x00000801u)
    fail(labels_path, 0, "expected rank-1 label magic 0x00000801, got " + hex32(lmagic));
  std::uint32_t lcount = read_u32(lab, labels_path, 4);
  if (8 + std::size_t(lcount) != lab.size()) {
    std::ostringstream os;
    os << "expected " << lcount << " label bytes but file holds " << (lab.size() - 8);
    fail(labels_path, 8, os.str());
  }
  if (lcount != count) {
    std::ostringstream os;
    os << "label count " << lcount << " does not match image count " << count;
    fail(labels_path, 4, os.str());
  }

  LabeledDataset ds;
  ds.images.reserve(count);
  ds.labels.reserve(count);
  int max_label = 0;
  std::size_t off = 16;
  for (std::uint32_t i = 0; i < count; ++i) {
    Image im(1, static_cast<int>(rows), static_cast<int>(cols));
    for (std::size_t p = 0; p < im.size(); ++p, ++off)
      im.pixels[p] = img[off] / 255.0;
    ds.images.push_back(std::move(im));
    int label = lab[8 + i];
    if (label > max_label) max_label = label;
    ds.labels.push_back(label);
  }
  ds.class_count = max_label + 1;
  return ds;
}

void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  ds.validate();
  if (ds.class_count > 256)
    throw std::runtime_error("IDX labels are bytes; cannot store more than 256 classes");
  if (ds.images.empty()) throw std::runtime_error("refusing to write an empty dataset");

  const Image& first = ds.images[0];
  std::uint32_t rows = static_cast<std::uint32_t>(first.channels) * first.height;
  std::uint32_t cols = static_cast<std::uint32_t>(first.width);

  std::string img;
  append_u32(img, 0x00000803u);
  append_u32(img, static_cast<std::uint32_t>(ds.images.size()));
  append_u32(img, rows);
  append_u32(img, cols);
  for (const Image& im : ds.images)
    for (double p : im.pixels) {
      long q = std::lround(p * 255.0);
      img.push_back(static_cast<char>(q < 0 ? 0 : (q > 255 ? 255 : q)));
    }

  std::string lab;
  append_u32(lab, 0x00000801u);
  append_u32(lab, static_cast<std::uint32_t>(ds.labels.size()));
  for (int l : ds.labels) lab.push_back(static_cast<char>(l));

  std::ofstream io(images_path, std::ios::binary | std::ios::trunc);
  if (!io) throw std::runtime_error(images_path + ": cannot open for writing");
  io.write(img.data(), static_cast<std::streamsize>(img.size()));
  std::ofstream lo(labels_path, std::ios::binary | std::ios::trunc);
  if (!lo) throw std::runtime_error(labels_path + ": cannot open for writing");
  lo.write(lab.data(), static_cast<std::streamsize>(lab.size()));
  if (!io.flush() || !lo.flush())
    throw std::runtime_error("failed to flush IDX output files");
}

}  // namespace scaledet
