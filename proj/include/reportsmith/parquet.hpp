#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "reportsmith/value.hpp"

namespace reportsmith::parquet {

enum class PhysicalType { int64, dbl, byte_array };

struct ColumnData {
    std::string name;
    PhysicalType type = PhysicalType::byte_array;
    std::vector<Value> values;  // monostate = null; all columns OPTIONAL
};

/// Picks the narrowest physical type that holds every non-null value:
/// all integers -> int64, any double -> dbl, any text -> byte_array.
PhysicalType infer_type(const std::vector<Value>& values);

/// Writes a single-row-group Parquet file with pinned settings: format
/// version 1, data page v1, PLAIN values, RLE definition levels, no
/// compression, no statistics, fixed created_by and no key/value metadata.
/// Identical inputs always produce identical bytes.
std::string write(const std::vector<ColumnData>& columns, std::size_t num_rows);

struct File {
    std::vector<ColumnData> columns;
    std::size_t num_rows = 0;
};

/// Reads flat files using PLAIN (or RLE-levelled) uncompressed v1 data pages
/// with INT32/INT64/DOUBLE/FLOAT/BOOLEAN/BYTE_ARRAY leaves. Throws
/// UnsupportedFormat for anything else (dictionary pages, codecs, nesting).
File read(std::string_view bytes);

}  // namespace reportsmith::parquet
