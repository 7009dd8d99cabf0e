#include "reportsmith/parquet.hpp"

#include <cstring>
#include <map>
#include <memory>

#include "reportsmith/error.hpp"

namespace reportsmith::parquet {
namespace {

// Parquet enum values.
constexpr int kTypeBoolean = 0, kTypeInt32 = 1, kTypeInt64 = 2, kTypeFloat = 4, kTypeDouble = 5,
              kTypeByteArray = 6;
constexpr int kRepRequired = 0, kRepOptional = 1;
constexpr int kConvertedUtf8 = 0;
constexpr int kEncPlain = 0, kEncRle = 3;
constexpr int kPageData = 0;
constexpr int kCodecUncompressed = 0;

// Thrift compact type ids.
enum : int {
    TBoolTrue = 1, TBoolFalse = 2, TByte = 3, TI16 = 4, TI32 = 5, TI64 = 6, TDouble = 7, TBinary = 8,
    TList = 9, TSet = 10, TMap = 11, TStruct = 12
};

class CompactWriter {
public:
    std::string out;

    void begin_struct() { last_.push_back(0); }
    void end_struct() {
        out.push_back(0);
        last_.pop_back();
    }
    void field(int id, int type) {
        int delta = id - last_.back();
        if (delta > 0 && delta <= 15) {
            out.push_back(static_cast<char>((delta << 4) | type));
        } else {
            out.push_back(static_cast<char>(type));
            varint(zigzag(id));
        }
        last_.back() = id;
    }
    void i32(int id, std::int32_t v) {
        field(id, TI32);
        varint(zigzag(v));
    }
    void i64(int id, std::int64_t v) {
        field(id, TI64);
        varint(zigzag(v));
    }
    void binary(int id, std::string_view s) {
        field(id, TBinary);
        raw_binary(s);
    }
    void list_header(int id, int elem_type, std::size_t n) {
        field(id, TList);
        if (n < 15) {
            out.push_back(static_cast<char>((n << 4) | elem_type));
        } else {
            out.push_back(static_cast<char>(0xF0 | elem_type));
            varint(n);
        }
    }
    void raw_binary(std::string_view s) {
        varint(s.size());
        out.append(s);
    }
    void raw_i32(std::int32_t v) { varint(zigzag(v)); }

private:
    std::vector<int> last_;

    static std::uint64_t zigzag(std::int64_t v) {
        return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
    }
    void varint(std::uint64_t v) {
        while (v >= 0x80) {
            out.push_back(static_cast<char>((v & 0x7F) | 0x80));
            v >>= 7;
        }
        out.push_back(static_cast<char>(v));
    }
};

void put_le32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_le64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

// RLE/bit-packed hybrid for bit width 1, emitted as RLE runs only.
std::string encode_levels(const std::vector<Value>& values) {
    std::string runs;
    std::size_t i = 0;
    while (i < values.size()) {
        const bool defined = !is_null(values[i]);
        std::size_t j = i;
        while (j < values.size() && !is_null(values[j]) == defined) ++j;
        std::uint64_t header = static_cast<std::uint64_t>(j - i) << 1;
        while (header >= 0x80) {
            runs.push_back(static_cast<char>((header & 0x7F) | 0x80));
            header >>= 7;
        }
        runs.push_back(static_cast<char>(header));
        runs.push_back(static_cast<char>(defined ? 1 : 0));
        i = j;
    }
    std::string out;
    put_le32(out, static_cast<std::uint32_t>(runs.size()));
    out += runs;
    return out;
}

std::string encode_values(const ColumnData& col) {
    std::string out;
    for (const auto& v : col.values) {
        if (is_null(v)) continue;
        switch (col.type) {
            case PhysicalType::int64: {
                std::int64_t x = 0;
                if (auto* i = std::get_if<std::int64_t>(&v)) x = *i;
                else if (auto* d = std::get_if<double>(&v)) x = static_cast<std::int64_t>(*d);
                put_le64(out, static_cast<std::uint64_t>(x));
                break;
            }
            case PhysicalType::dbl: {
                double d = as_double(v).value_or(0.0);
                std::uint64_t bits;
                std::memcpy(&bits, &d, sizeof bits);
                put_le64(out, bits);
                break;
            }
            case PhysicalType::byte_array: {
                std::string s = to_text(v);
                put_le32(out, static_cast<std::uint32_t>(s.size()));
                out += s;
                break;
            }
        }
    }
    return out;
}

int parquet_type(PhysicalType t) {
    switch (t) {
        case PhysicalType::int64: return kTypeInt64;
        case PhysicalType::dbl: return kTypeDouble;
        case PhysicalType::byte_array: return kTypeByteArray;
    }
    return kTypeByteArray;
}

// ---------------------------------------------------------------- reading

struct TValue;
using TStructV = std::map<int, TValue>;

struct TValue {
    int type = 0;
    std::int64_t i = 0;
    double d = 0;
    std::string bin;
    std::vector<TValue> list;
    std::shared_ptr<TStructV> fields;

    const TValue* get(int id) const {
        if (!fields) return nullptr;
        auto it = fields->find(id);
        return it == fields->end() ? nullptr : &it->second;
    }
};

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::UnsupportedFormat, "parquet: " + what); }

class CompactReader {
public:
    CompactReader(std::string_view data) : d_(data) {}
    std::size_t pos() const { return p_; }

    TValue read_struct() {
        TValue v;
        v.type = TStruct;
        v.fields = std::make_shared<TStructV>();
        int last = 0;
        while (true) {
            std::uint8_t b = byte();
            if (b == 0) break;
            int type = b & 0x0F;
            int delta = b >> 4;
            int id = delta ? last + delta : static_cast<int>(unzigzag(varint()));
            last = id;
            (*v.fields)[id] = read_value(type);
        }
        return v;
    }

private:
    std::string_view d_;
    std::size_t p_ = 0;

    std::uint8_t byte() {
        if (p_ >= d_.size()) bad("truncated metadata");
        return static_cast<std::uint8_t>(d_[p_++]);
    }
    std::uint64_t varint() {
        std::uint64_t r = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            std::uint8_t b = byte();
            r |= static_cast<std::uint64_t>(b & 0x7F) << shift;
            if (!(b & 0x80)) return r;
        }
        bad("varint overflow");
    }
    static std::int64_t unzigzag(std::uint64_t v) { return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1); }

    TValue read_value(int type) {
        TValue v;
        v.type = type;
        switch (type) {
            case TBoolTrue: v.i = 1; break;
            case TBoolFalse: v.i = 0; break;
            case TByte: v.i = static_cast<std::int8_t>(byte()); break;
            case TI16:
            case TI32:
            case TI64: v.i = unzigzag(varint()); break;
            case TDouble: {
                if (p_ + 8 > d_.size()) bad("truncated double");
                std::memcpy(&v.d, d_.data() + p_, 8);
                p_ += 8;
                break;
            }
            case TBinary: {
                auto n = varint();
                if (p_ + n > d_.size()) bad("truncated binary");
                v.bin.assign(d_.data() + p_, n);
                p_ += n;
                break;
            }
            case TList:
            case TSet: {
                std::uint8_t h = byte();
                std::uint64_t n = h >> 4;
                int et = h & 0x0F;
                if (n == 15) n = varint();
                for (std::uint64_t k = 0; k < n; ++k) {
                    if (et == TBoolTrue || et == TBoolFalse) {
                        TValue e;
                        e.type = et;
                        e.i = byte() == 1;
                        v.list.push_back(std::move(e));
                    } else {
                        v.list.push_back(read_value(et));
                    }
                }
                break;
            }
            case TMap: {
                auto n = varint();
                if (n == 0) break;
                std::uint8_t kv = byte();
                for (std::uint64_t k = 0; k < n; ++k) {
                    v.list.push_back(read_value(kv >> 4));
                    v.list.push_back(read_value(kv & 0x0F));
                }
                break;
            }
            case TStruct: return read_struct();
            default: bad("unknown thrift type " + std::to_string(type));
        }
        return v;
    }
};

std::int64_t req_i(const TValue& s, int id, const char* what) {
    const TValue* f = s.get(id);
    if (!f) bad(std::string("missing ") + what);
    return f->i;
}

std::uint32_t le32(std::string_view b, std::size_t at) {
    if (at + 4 > b.size()) bad("truncated page");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[at + i])) << (8 * i);
    return v;
}
std::uint64_t le64(std::string_view b, std::size_t at) {
    if (at + 8 > b.size()) bad("truncated page");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(b[at + i])) << (8 * i);
    return v;
}

// Decodes `count` levels of bit width 1 from an RLE/bit-packed hybrid run list.
std::vector<int> decode_levels(std::string_view runs, std::size_t count) {
    std::vector<int> out;
    std::size_t p = 0;
    while (out.size() < count) {
        if (p >= runs.size()) bad("truncated definition levels");
        std::uint64_t header = 0;
        for (int shift = 0;; shift += 7) {
            if (p >= runs.size()) bad("truncated level header");
            auto b = static_cast<std::uint8_t>(runs[p++]);
            header |= static_cast<std::uint64_t>(b & 0x7F) << shift;
            if (!(b & 0x80)) break;
        }
        if (header & 1) {
            std::size_t groups = header >> 1;
            for (std::size_t g = 0; g < groups; ++g) {
                if (p >= runs.size()) bad("truncated bit-packed levels");
                auto byte = static_cast<std::uint8_t>(runs[p++]);
                for (int bit = 0; bit < 8 && out.size() < count; ++bit) out.push_back((byte >> bit) & 1);
            }
        } else {
            std::size_t n = header >> 1;
            if (p >= runs.size()) bad("truncated rle value");
            int val = static_cast<std::uint8_t>(runs[p++]) & 1;
            for (std::size_t k = 0; k < n && out.size() < count; ++k) out.push_back(val);
        }
    }
    return out;
}

}  // namespace

PhysicalType infer_type(const std::vector<Value>& values) {
    bool any = false, any_double = false;
    for (const auto& v : values) {
        if (is_null(v)) continue;
        any = true;
        if (std::holds_alternative<std::string>(v)) return PhysicalType::byte_array;
        if (std::holds_alternative<double>(v)) any_double = true;
    }
    if (!any) return PhysicalType::byte_array;
    return any_double ? PhysicalType::dbl : PhysicalType::int64;
}

std::string write(const std::vector<ColumnData>& columns, std::size_t num_rows) {
    for (const auto& c : columns)
        if (c.values.size() != num_rows) throw Error(ErrorCode::ParseError, "column length mismatch for " + c.name);

    std::string file = "PAR1";
    struct ChunkInfo {
        std::int64_t offset;
        std::int64_t size;
    };
    std::vector<ChunkInfo> chunks;

    if (num_rows > 0) {
        for (const auto& col : columns) {
            std::string body = encode_levels(col.values) + encode_values(col);
            CompactWriter h;
            h.begin_struct();
            h.i32(1, kPageData);
            h.i32(2, static_cast<std::int32_t>(body.size()));
            h.i32(3, static_cast<std::int32_t>(body.size()));
            h.field(5, TStruct);
            h.begin_struct();
            h.i32(1, static_cast<std::int32_t>(num_rows));
            h.i32(2, kEncPlain);
            h.i32(3, kEncRle);
            h.i32(4, kEncRle);
            h.end_struct();
            h.end_struct();
            chunks.push_back({static_cast<std::int64_t>(file.size()), static_cast<std::int64_t>(h.out.size() + body.size())});
            file += h.out;
            file += body;
        }
    }

    CompactWriter m;
    m.begin_struct();
    m.i32(1, 1);
    m.list_header(2, TStruct, columns.size() + 1);
    m.begin_struct();
    m.binary(4, "schema");
    m.i32(5, static_cast<std::int32_t>(columns.size()));
    m.end_struct();
    for (const auto& col : columns) {
        m.begin_struct();
        m.i32(1, parquet_type(col.type));
        m.i32(3, kRepOptional);
        m.binary(4, col.name);
        if (col.type == PhysicalType::byte_array) m.i32(6, kConvertedUtf8);
        m.end_struct();
    }
    m.i64(3, static_cast<std::int64_t>(num_rows));
    m.list_header(4, TStruct, num_rows > 0 ? 1 : 0);
    if (num_rows > 0) {
        std::int64_t total = 0;
        for (const auto& c : chunks) total += c.size;
        m.begin_struct();
        m.list_header(1, TStruct, columns.size());
        for (std::size_t i = 0; i < columns.size(); ++i) {
            m.begin_struct();
            m.i64(2, chunks[i].offset);
            m.field(3, TStruct);
            m.begin_struct();
            m.i32(1, parquet_type(columns[i].type));
            m.list_header(2, TI32, 2);
            m.raw_i32(kEncPlain);
            m.raw_i32(kEncRle);
            m.list_header(3, TBinary, 1);
            m.raw_binary(columns[i].name);
            m.i32(4, kCodecUncompressed);
            m.i64(5, static_cast<std::int64_t>(num_rows));
            m.i64(6, chunks[i].size);
            m.i64(7, chunks[i].size);
            m.i64(9, chunks[i].offset);
            m.end_struct();
            m.end_struct();
        }
        m.i64(2, total);
        m.i64(3, static_cast<std::int64_t>(num_rows));
        m.end_struct();
    }
    m.binary(6, "reportsmith parquet writer 1");
    m.end_struct();

    file += m.out;
    put_le32(file, static_cast<std::uint32_t>(m.out.size()));
    file += "PAR1";
    return file;
}

File read(std::string_view bytes) {
    if (bytes.size() < 12 || bytes.substr(0, 4) != "PAR1" || bytes.substr(bytes.size() - 4) != "PAR1")
        bad("missing magic");
    std::uint32_t meta_len = le32(bytes, bytes.size() - 8);
    if (meta_len + 12 > bytes.size()) bad("bad footer length");
    CompactReader mr(bytes.substr(bytes.size() - 8 - meta_len, meta_len));
    TValue meta = mr.read_struct();

    File file;
    file.num_rows = static_cast<std::size_t>(req_i(meta, 3, "num_rows"));
    const TValue* schema = meta.get(2);
    if (!schema || schema->list.empty()) bad("missing schema");

    struct Leaf {
        int type;
        bool optional;
    };
    std::vector<Leaf> leaves;
    for (std::size_t i = 1; i < schema->list.size(); ++i) {
        const auto& el = schema->list[i];
        if (el.get(5) && el.get(5)->i > 0) bad("nested schemas are not supported");
        const TValue* t = el.get(1);
        if (!t) bad("group column without type");
        const TValue* rep = el.get(3);
        int r = rep ? static_cast<int>(rep->i) : kRepRequired;
        if (r != kRepRequired && r != kRepOptional) bad("repeated columns are not supported");
        ColumnData cd;
        cd.name = el.get(4) ? el.get(4)->bin : "";
        int pt = static_cast<int>(t->i);
        cd.type = (pt == kTypeByteArray) ? PhysicalType::byte_array
                  : (pt == kTypeDouble || pt == kTypeFloat) ? PhysicalType::dbl
                                                            : PhysicalType::int64;
        if (pt != kTypeBoolean && pt != kTypeInt32 && pt != kTypeInt64 && pt != kTypeFloat && pt != kTypeDouble &&
            pt != kTypeByteArray)
            bad("unsupported physical type " + std::to_string(pt));
        file.columns.push_back(std::move(cd));
        leaves.push_back({pt, r == kRepOptional});
    }

    const TValue* rgs = meta.get(4);
    if (!rgs) return file;
    for (const auto& rg : rgs->list) {
        const TValue* cols = rg.get(1);
        if (!cols || cols->list.size() != leaves.size()) bad("row group column count mismatch");
        for (std::size_t c = 0; c < leaves.size(); ++c) {
            const TValue* md = cols->list[c].get(3);
            if (!md) bad("missing column metadata");
            if (req_i(*md, 4, "codec") != kCodecUncompressed) bad("compressed column chunks are not supported");
            std::int64_t num_values = req_i(*md, 5, "num_values");
            std::size_t pos = static_cast<std::size_t>(req_i(*md, 9, "data_page_offset"));
            if (const TValue* dict = md->get(11)) pos = std::min(pos, static_cast<std::size_t>(dict->i));
            std::int64_t seen = 0;
            auto& out = file.columns[c].values;
            while (seen < num_values) {
                if (pos >= bytes.size()) bad("page offset out of range");
                CompactReader hr(bytes.substr(pos));
                TValue ph = hr.read_struct();
                std::size_t body_at = pos + hr.pos();
                auto comp = static_cast<std::size_t>(req_i(ph, 3, "compressed_page_size"));
                if (body_at + comp > bytes.size()) bad("page body out of range");
                std::string_view body = bytes.substr(body_at, comp);
                pos = body_at + comp;
                int ptype = static_cast<int>(req_i(ph, 1, "page type"));
                if (ptype != kPageData) bad("unsupported page type " + std::to_string(ptype));
                const TValue* dph = ph.get(5);
                if (!dph) bad("missing data page header");
                auto n = static_cast<std::size_t>(req_i(*dph, 1, "num_values"));
                if (req_i(*dph, 2, "encoding") != kEncPlain) bad("only PLAIN value encoding is supported");
                std::size_t at = 0;
                std::vector<int> levels(n, 1);
                if (leaves[c].optional) {
                    std::uint32_t len = le32(body, 0);
                    if (4 + len > body.size()) bad("level run out of range");
                    levels = decode_levels(body.substr(4, len), n);
                    at = 4 + len;
                }
                int bool_bit = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (!levels[k]) {
                        out.emplace_back();
                        continue;
                    }
                    switch (leaves[c].type) {
                        case kTypeInt32:
                            out.emplace_back(static_cast<std::int64_t>(static_cast<std::int32_t>(le32(body, at))));
                            at += 4;
                            break;
                        case kTypeInt64:
                            out.emplace_back(static_cast<std::int64_t>(le64(body, at)));
                            at += 8;
                            break;
                        case kTypeFloat: {
                            std::uint32_t b = le32(body, at);
                            float f;
                            std::memcpy(&f, &b, 4);
                            out.emplace_back(static_cast<double>(f));
                            at += 4;
                            break;
                        }
                        case kTypeDouble: {
                            std::uint64_t b = le64(body, at);
                            double d;
                            std::memcpy(&d, &b, 8);
                            out.emplace_back(d);
                            at += 8;
                            break;
                        }
                        case kTypeBoolean: {
                            if (at >= body.size()) bad("truncated booleans");
                            int bit = (static_cast<std::uint8_t>(body[at]) >> bool_bit) & 1;
                            out.emplace_back(static_cast<std::int64_t>(bit));
                            if (++bool_bit == 8) {
                                bool_bit = 0;
                                ++at;
                            }
                            break;
                        }
                        case kTypeByteArray: {
                            std::uint32_t len = le32(body, at);
                            at += 4;
                            if (at + len > body.size()) bad("byte array out of range");
                            out.emplace_back(std::string(body.substr(at, len)));
                            at += len;
                            break;
                        }
                    }
                }
                seen += static_cast<std::int64_t>(n);
            }
        }
    }
    for (const auto& c : file.columns)
        if (c.values.size() != file.num_rows) bad("column '" + c.name + "' value count mismatch");
    return file;
}

}  // namespace reportsmith::parquet
