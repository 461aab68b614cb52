/*!
  \file gate.hpp
  \brief Standard-gate vocabulary shared by every module

  Gate kinds, their arity rules and bit-parallel evaluation.
*/

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace mimic
{

enum class gate_type : uint8_t
{
  input,
  output,
  and_,
  nand,
  or_,
  nor,
  xor_,
  xnor,
  not_,
  buf,
  const0,
  const1
};

inline constexpr std::array<gate_type, 12> all_gate_types = {
    gate_type::input, gate_type::output, gate_type::and_, gate_type::nand,
    gate_type::or_, gate_type::nor, gate_type::xor_, gate_type::xnor,
    gate_type::not_, gate_type::buf, gate_type::const0, gate_type::const1 };

inline std::string_view to_string( gate_type t )
{
  switch ( t )
  {
  case gate_type::input: return "INPUT";
  case gate_type::output: return "OUTPUT";
  case gate_type::and_: return "AND";
  case gate_type::nand: return "NAND";
  case gate_type::or_: return "OR";
  case gate_type::nor: return "NOR";
  case gate_type::xor_: return "XOR";
  case gate_type::xnor: return "XNOR";
  case gate_type::not_: return "NOT";
  case gate_type::buf: return "BUF";
  case gate_type::const0: return "CONST0";
  case gate_type::const1: return "CONST1";
  }
  return "?";
}

/*! \brief Case-insensitive gate keyword lookup.
 *
 * Accepts the ISCAS spelling `BUFF` and the aliases `INV`, `GND`, `VDD`.
 */
inline std::optional<gate_type> gate_from_string( std::string_view s )
{
  std::string up( s );
  std::transform( up.begin(), up.end(), up.begin(), []( unsigned char c ) { return static_cast<char>( std::toupper( c ) ); } );
  if ( up == "BUFF" )
    return gate_type::buf;
  if ( up == "INV" )
    return gate_type::not_;
  if ( up == "GND" )
    return gate_type::const0;
  if ( up == "VDD" )
    return gate_type::const1;
  for ( auto t : all_gate_types )
  {
    if ( to_string( t ) == up )
      return t;
  }
  return std::nullopt;
}

inline bool is_constant( gate_type t )
{
  return t == gate_type::const0 || t == gate_type::const1;
}

inline bool is_unary( gate_type t )
{
  return t == gate_type::not_ || t == gate_type::buf || t == gate_type::output;
}

/*! \brief Multi-input gate (AND/NAND/OR/NOR/XOR/XNOR). */
inline bool is_nary( gate_type t )
{
  switch ( t )
  {
  case gate_type::and_:
  case gate_type::nand:
  case gate_type::or_:
  case gate_type::nor:
  case gate_type::xor_:
  case gate_type::xnor:
    return true;
  default:
    return false;
  }
}

/*! \brief Whether `arity` inputs are legal for gate kind `t`. */
inline bool arity_ok( gate_type t, std::size_t arity )
{
  if ( t == gate_type::input || is_constant( t ) )
    return arity == 0;
  if ( is_unary( t ) )
    return arity == 1;
  return arity >= 2;
}

/*! \brief Evaluates a gate on 64 patterns at once. */
inline uint64_t evaluate( gate_type t, std::span<uint64_t const> in )
{
  switch ( t )
  {
  case gate_type::const0:
    return 0;
  case gate_type::const1:
    return ~uint64_t( 0 );
  case gate_type::input:
    return 0;
  case gate_type::buf:
  case gate_type::output:
    return in[0];
  case gate_type::not_:
    return ~in[0];
  case gate_type::and_:
  case gate_type::nand:
  {
    uint64_t r = ~uint64_t( 0 );
    for ( auto v : in )
      r &= v;
    return t == gate_type::nand ? ~r : r;
  }
  case gate_type::or_:
  case gate_type::nor:
  {
    uint64_t r = 0;
    for ( auto v : in )
      r |= v;
    return t == gate_type::nor ? ~r : r;
  }
  case gate_type::xor_:
  case gate_type::xnor:
  {
    uint64_t r = 0;
    for ( auto v : in )
      r ^= v;
    return t == gate_type::xnor ? ~r : r;
  }
  }
  return 0;
}

} // namespace mimic
