#ifndef SCALEDET_IDX_HPP
#define SCALEDET_IDX_HPP

#include <string>

#include "scaledet/dataset.hpp"

namespace scaledet {

// Reads an IDX image/label file pair (big-endian, rank-3 image magic
// 0x00000803, rank-1 label magic 0x00000801). Pixels are bytes and are
// normalized to [0,1] by division by 255. The loaded images are single
// channel with shape (1, rows, cols); class_count is inferred as
// max(label) + 1. Malformed input raises std::runtime_error naming the file
// and the byte offset of the problem.
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

// Writes the dataset as an IDX pair. Pixels are quantized to bytes by
// round(p * 255). Multi-channel images are stored by folding channels into
// the row dimension (rows = channels * height), which load_idx reads back as
// a single-channel image of that taller shape.
void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path);

}  // namespace scaledet

#endif  // SCALEDET_IDX_HPP
