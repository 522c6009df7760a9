#pragma once

#include <arpa/inet.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "darkdns/error.hpp"
#include "darkdns/name.hpp"

namespace darkdns::dns {

namespace type {
inline constexpr std::uint16_t A = 1;
inline constexpr std::uint16_t NS = 2;
inline constexpr std::uint16_t CNAME = 5;
inline constexpr std::uint16_t SOA = 6;
inline constexpr std::uint16_t AAAA = 28;
inline constexpr std::uint16_t OPT = 41;
}  // namespace type

inline constexpr std::uint16_t kClassIn = 1;
inline constexpr std::uint16_t kEdnsPayload = 1232;
inline constexpr std::size_t kClassicUdpLimit = 512;

enum class Rcode : std::uint8_t { NoError = 0, FormErr = 1, ServFail = 2, NxDomain = 3, NotImp = 4, Refused = 5 };

struct Header {
  std::uint16_t id = 0;
  bool qr = false;
  std::uint8_t opcode = 0;
  bool aa = false;
  bool tc = false;
  bool rd = false;
  bool ra = false;
  Rcode rcode = Rcode::NoError;
};

struct Question {
  std::string name;
  std::uint16_t qtype = type::A;
  std::uint16_t qclass = kClassIn;
};

struct ResourceRecord {
  std::string name;
  std::uint16_t rtype = type::A;
  std::uint16_t rclass = kClassIn;
  std::uint32_t ttl = 0;
  /// Uncompressed RDATA. Names inside RDATA are expanded during decoding.
  std::vector<std::uint8_t> rdata;
  /// Presentation form for A, AAAA, NS, CNAME; empty otherwise.
  std::string text;
};

struct Message {
  Header header;
  std::vector<Question> questions;
  std::vector<ResourceRecord> answers;
  std::vector<ResourceRecord> authority;
  std::vector<ResourceRecord> additional;
  /// Advertised EDNS0 UDP payload size, when an OPT record is present.
  std::optional<std::uint16_t> edns_payload;
};

class WireError : public Error {
 public:
  explicit WireError(const std::string& what) : Error(ErrorCode::ParseError, "dns wire: " + what) {}
};

// ---------------------------------------------------------------------------
// Encoding

namespace detail {

inline void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v >> 16));
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
}

/// Writes a name, reusing earlier suffixes through compression pointers when
/// `table` is provided.
inline void put_name(std::vector<std::uint8_t>& out, std::string_view name,
                     std::unordered_map<std::string, std::uint16_t>* table) {
  if (!name.empty() && name.back() == '.') name.remove_suffix(1);
  while (!name.empty()) {
    if (table) {
      if (const auto it = table->find(std::string(name)); it != table->end()) {
        put16(out, static_cast<std::uint16_t>(0xC000 | it->second));
        return;
      }
      if (out.size() < 0x3FFF) table->emplace(std::string(name), static_cast<std::uint16_t>(out.size()));
    }
    const auto dot = name.find('.');
    const auto label = name.substr(0, dot);
    if (label.empty() || label.size() > kMaxLabelLength) throw WireError("bad label in '" + std::string(name) + "'");
    out.push_back(static_cast<std::uint8_t>(label.size()));
    out.insert(out.end(), label.begin(), label.end());
    name = dot == std::string_view::npos ? std::string_view{} : name.substr(dot + 1);
  }
  out.push_back(0);
}

inline void put_record(std::vector<std::uint8_t>& out, const ResourceRecord& rr,
                       std::unordered_map<std::string, std::uint16_t>* table) {
  put_name(out, rr.name, table);
  put16(out, rr.rtype);
  put16(out, rr.rclass);
  put32(out, rr.ttl);
  put16(out, static_cast<std::uint16_t>(rr.rdata.size()));
  out.insert(out.end(), rr.rdata.begin(), rr.rdata.end());
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Message& m, bool compress = true) {
  std::vector<std::uint8_t> out;
  out.reserve(128);
  std::unordered_map<std::string, std::uint16_t> table;
  auto* t = compress ? &table : nullptr;
  const auto& h = m.header;
  detail::put16(out, h.id);
  std::uint16_t flags = 0;
  flags |= h.qr ? 0x8000 : 0;
  flags |= static_cast<std::uint16_t>((h.opcode & 0x0F) << 11);
  flags |= h.aa ? 0x0400 : 0;
  flags |= h.tc ? 0x0200 : 0;
  flags |= h.rd ? 0x0100 : 0;
  flags |= h.ra ? 0x0080 : 0;
  flags |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(h.rcode) & 0x0F);
  detail::put16(out, flags);
  detail::put16(out, static_cast<std::uint16_t>(m.questions.size()));
  detail::put16(out, static_cast<std::uint16_t>(m.answers.size()));
  detail::put16(out, static_cast<std::uint16_t>(m.authority.size()));
  detail::put16(out, static_cast<std::uint16_t>(m.additional.size() + (m.edns_payload ? 1 : 0)));
  for (const auto& q : m.questions) {
    detail::put_name(out, q.name, t);
    detail::put16(out, q.qtype);
    detail::put16(out, q.qclass);
  }
  for (const auto& rr : m.answers) detail::put_record(out, rr, t);
  for (const auto& rr : m.authority) detail::put_record(out, rr, t);
  for (const auto& rr : m.additional) detail::put_record(out, rr, t);
  if (m.edns_payload) {
    out.push_back(0);  // root owner
    detail::put16(out, type::OPT);
    detail::put16(out, *m.edns_payload);
    detail::put32(out, 0);
    detail::put16(out, 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoding

namespace detail {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((buf_[pos_] << 8) | buf_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    const std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> v(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }

  /// Reads a possibly-compressed name starting at the cursor.
  std::string name() { return name_at(pos_, true); }

  /// Reads a name at an absolute offset without moving the cursor.
  std::string name_at_offset(std::size_t offset) const {
    std::size_t p = offset;
    return const_cast<Reader*>(this)->name_at(p, false);
  }

  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw WireError("truncated message");
  }

  std::string name_at(std::size_t& cursor, bool advance) {
    std::string out;
    std::size_t p = cursor;
    bool jumped = false;
    int jumps = 0;
    while (true) {
      if (p >= buf_.size()) throw WireError("name runs past end");
      const std::uint8_t len = buf_[p];
      if ((len & 0xC0) == 0xC0) {
        if (p + 1 >= buf_.size()) throw WireError("truncated pointer");
        const std::size_t target = static_cast<std::size_t>(((len & 0x3F) << 8) | buf_[p + 1]);
        if (!jumped && advance) cursor = p + 2;
        jumped = true;
        if (++jumps > 64 || target >= buf_.size()) throw WireError("compression pointer loop");
        p = target;
        continue;
      }
      if ((len & 0xC0) != 0) throw WireError("unsupported label type");
      if (len == 0) {
        if (!jumped && advance) cursor = p + 1;
        break;
      }
      if (p + 1 + len > buf_.size()) throw WireError("label runs past end");
      if (!out.empty()) out.push_back('.');
      for (std::size_t i = 0; i < len; ++i) {
        const char c = static_cast<char>(buf_[p + 1 + i]);
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
      }
      if (out.size() > 255) throw WireError("name too long");
      p += 1 + len;
    }
    if (advance) pos_ = cursor;
    return out;
  }

  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

inline std::string ipv4_text(const std::vector<std::uint8_t>& rd) {
  char buf[INET_ADDRSTRLEN];
  return inet_ntop(AF_INET, rd.data(), buf, sizeof buf) ? buf : "";
}

inline std::string ipv6_text(const std::vector<std::uint8_t>& rd) {
  char buf[INET6_ADDRSTRLEN];
  return inet_ntop(AF_INET6, rd.data(), buf, sizeof buf) ? buf : "";
}

inline ResourceRecord read_record(Reader& r) {
  ResourceRecord rr;
  rr.name = r.name();
  rr.rtype = r.u16();
  rr.rclass = r.u16();
  rr.ttl = r.u32();
  const std::uint16_t rdlen = r.u16();
  const std::size_t rd_start = r.pos();
  rr.rdata = r.bytes(rdlen);
  switch (rr.rtype) {
    case type::A:
      if (rdlen != 4) throw WireError("A rdata must be 4 bytes");
      rr.text = ipv4_text(rr.rdata);
      break;
    case type::AAAA:
      if (rdlen != 16) throw WireError("AAAA rdata must be 16 bytes");
      rr.text = ipv6_text(rr.rdata);
      break;
    case type::NS:
    case type::CNAME: {
      rr.text = r.name_at_offset(rd_start);
      // Store the expanded form so the record survives re-encoding.
      std::vector<std::uint8_t> expanded;
      put_name(expanded, rr.text, nullptr);
      rr.rdata = std::move(expanded);
      break;
    }
    default: break;
  }
  return rr;
}

}  // namespace detail

inline Message decode(std::span<const std::uint8_t> wire) {
  detail::Reader r(wire);
  Message m;
  m.header.id = r.u16();
  const std::uint16_t flags = r.u16();
  m.header.qr = flags & 0x8000;
  m.header.opcode = static_cast<std::uint8_t>((flags >> 11) & 0x0F);
  m.header.aa = flags & 0x0400;
  m.header.tc = flags & 0x0200;
  m.header.rd = flags & 0x0100;
  m.header.ra = flags & 0x0080;
  m.header.rcode = static_cast<Rcode>(flags & 0x0F);
  const std::uint16_t qd = r.u16(), an = r.u16(), ns = r.u16(), ar = r.u16();
  for (std::uint16_t i = 0; i < qd; ++i) {
    Question q;
    q.name = r.name();
    q.qtype = r.u16();
    q.qclass = r.u16();
    m.questions.push_back(std::move(q));
  }
  for (std::uint16_t i = 0; i < an; ++i) m.answers.push_back(detail::read_record(r));
  for (std::uint16_t i = 0; i < ns; ++i) m.authority.push_back(detail::read_record(r));
  for (std::uint16_t i = 0; i < ar; ++i) {
    auto rr = detail::read_record(r);
    if (rr.rtype == type::OPT) {
      m.edns_payload = rr.rclass;
    } else {
      m.additional.push_back(std::move(rr));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Builders

inline Message make_query(std::uint16_t id, std::string name, std::uint16_t qtype, bool recursion_desired) {
  Message m;
  m.header.id = id;
  m.header.rd = recursion_desired;
  m.questions.push_back(Question{std::move(name), qtype, kClassIn});
  m.edns_payload = kEdnsPayload;
  return m;
}

inline Message make_response(const Message& query, Rcode rcode) {
  Message m;
  m.header = query.header;
  m.header.qr = true;
  m.header.rcode = rcode;
  m.header.tc = false;
  m.questions = query.questions;
  if (query.edns_payload) m.edns_payload = kEdnsPayload;
  return m;
}

inline ResourceRecord make_a(std::string name, const std::string& addr, std::uint32_t ttl) {
  ResourceRecord rr{std::move(name), type::A, kClassIn, ttl, std::vector<std::uint8_t>(4), addr};
  if (inet_pton(AF_INET, addr.c_str(), rr.rdata.data()) != 1) throw WireError("bad IPv4 '" + addr + "'");
  return rr;
}

inline ResourceRecord make_aaaa(std::string name, const std::string& addr, std::uint32_t ttl) {
  ResourceRecord rr{std::move(name), type::AAAA, kClassIn, ttl, std::vector<std::uint8_t>(16), addr};
  if (inet_pton(AF_INET6, addr.c_str(), rr.rdata.data()) != 1) throw WireError("bad IPv6 '" + addr + "'");
  rr.text = detail::ipv6_text(rr.rdata);
  return rr;
}

inline ResourceRecord make_ns(std::string name, const std::string& target, std::uint32_t ttl) {
  ResourceRecord rr{std::move(name), type::NS, kClassIn, ttl, {}, target};
  detail::put_name(rr.rdata, target, nullptr);
  return rr;
}

inline ResourceRecord make_soa(std::string zone, std::uint32_t ttl, std::uint32_t serial, std::uint32_t minimum) {
  ResourceRecord rr{zone, type::SOA, kClassIn, ttl, {}, {}};
  detail::put_name(rr.rdata, "a.nic." + zone, nullptr);
  detail::put_name(rr.rdata, "hostmaster.nic." + zone, nullptr);
  for (const std::uint32_t v : {serial, 1800u, 900u, 604800u, minimum}) detail::put32(rr.rdata, v);
  return rr;
}

}  // namespace darkdns::dns
