/*!
  \file bench.hpp
  \brief Reader and writer for the ISCAS `.bench` format

  Grammar:

      INPUT(name)
      OUTPUT(name)
      name = GATE(arg1, arg2, ...)

  `#` starts a comment, blank lines are ignored, and gate keywords are
  case-insensitive. Signals may be referenced before they are defined.
*/

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "gate.hpp"
#include "netlist.hpp"

namespace mimic
{

namespace detail
{

inline std::string_view trim( std::string_view s )
{
  auto const ws = " \t\r\n";
  auto const b = s.find_first_not_of( ws );
  if ( b == std::string_view::npos )
    return {};
  auto const e = s.find_last_not_of( ws );
  return s.substr( b, e - b + 1 );
}

inline bool valid_signal_name( std::string_view s )
{
  if ( s.empty() )
    return false;
  for ( char c : s )
  {
    if ( c == '(' || c == ')' || c == ',' || c == '=' || c == '#' || std::isspace( static_cast<unsigned char>( c ) ) )
      return false;
  }
  return true;
}

struct bench_statement
{
  enum class kind
  {
    input,
    output,
    gate
  } what;
  std::size_t line;
  std::string name;
  gate_type type{ gate_type::buf };
  std::vector<std::string> args;
};

/* parses `KEYWORD(a, b, c)`; returns false on malformed syntax */
inline bool parse_call( std::string_view s, std::string& keyword, std::vector<std::string>& args )
{
  auto const open = s.find( '(' );
  auto const close = s.rfind( ')' );
  if ( open == std::string_view::npos || close == std::string_view::npos || close < open || !trim( s.substr( close + 1 ) ).empty() )
    return false;
  keyword = std::string( trim( s.substr( 0, open ) ) );
  if ( keyword.empty() )
    return false;
  args.clear();
  auto inner = trim( s.substr( open + 1, close - open - 1 ) );
  if ( inner.empty() )
    return true;
  std::size_t pos = 0;
  while ( true )
  {
    auto const comma = inner.find( ',', pos );
    auto const tok = trim( inner.substr( pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos ) );
    if ( !valid_signal_name( tok ) )
      return false;
    args.emplace_back( tok );
    if ( comma == std::string_view::npos )
      break;
    pos = comma + 1;
  }
  return true;
}

} // namespace detail

/*! \brief Parses `.bench` text into a validated netlist.
 *
 * Node order follows definition order in the file. Throws `parse_error`
 * for syntax errors, undefined signals and duplicate definitions, and
 * `cycle_error` for combinational loops.
 */
inline netlist parse_bench( std::string_view text )
{
  using detail::bench_statement;
  std::vector<bench_statement> stmts;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while ( pos <= text.size() )
  {
    auto const nl = text.find( '\n', pos );
    auto raw = text.substr( pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos );
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if ( auto const hash = raw.find( '#' ); hash != std::string_view::npos )
      raw = raw.substr( 0, hash );
    auto const line = detail::trim( raw );
    if ( line.empty() )
      continue;

    std::string keyword;
    std::vector<std::string> args;
    if ( auto const eq = line.find( '=' ); eq != std::string_view::npos )
    {
      auto const lhs = detail::trim( line.substr( 0, eq ) );
      if ( !detail::valid_signal_name( lhs ) )
        throw parse_error( line_no, "invalid signal name '" + std::string( lhs ) + "'" );
      if ( !detail::parse_call( line.substr( eq + 1 ), keyword, args ) )
        throw parse_error( line_no, "expected GATE(args) after '='" );
      auto const type = gate_from_string( keyword );
      if ( !type || *type == gate_type::input || *type == gate_type::output )
        throw parse_error( line_no, "unknown gate '" + keyword + "'" );
      if ( !arity_ok( *type, args.size() ) )
        throw parse_error( line_no, std::string( to_string( *type ) ) + " cannot take " + std::to_string( args.size() ) + " inputs" );
      stmts.push_back( { bench_statement::kind::gate, line_no, std::string( lhs ), *type, std::move( args ) } );
    }
    else
    {
      if ( !detail::parse_call( line, keyword, args ) || args.size() != 1 )
        throw parse_error( line_no, "expected INPUT(name), OUTPUT(name) or an assignment" );
      auto const type = gate_from_string( keyword );
      if ( type == gate_type::input )
        stmts.push_back( { bench_statement::kind::input, line_no, args[0], gate_type::input, {} } );
      else if ( type == gate_type::output )
        stmts.push_back( { bench_statement::kind::output, line_no, args[0], gate_type::output, {} } );
      else
        throw parse_error( line_no, "unknown declaration '" + keyword + "'" );
    }
  }

  netlist ntk;
  std::unordered_map<std::string, std::size_t> defined_at;
  for ( auto const& s : stmts )
  {
    if ( s.what == bench_statement::kind::output )
      continue;
    if ( auto it = defined_at.find( s.name ); it != defined_at.end() )
      throw parse_error( s.line, "duplicate definition of '" + s.name + "' (first defined on line " + std::to_string( it->second ) + ")" );
    defined_at.emplace( s.name, s.line );
    if ( s.what == bench_statement::kind::input )
      ntk.add_input( s.name );
    else
      ntk.add_placeholder( s.name, s.type );
  }

  std::unordered_set<std::string> outputs;
  for ( auto const& s : stmts )
  {
    if ( s.what == bench_statement::kind::gate )
    {
      std::vector<node_id> fanin;
      for ( auto const& a : s.args )
      {
        auto const id = ntk.find( a );
        if ( !id )
          throw parse_error( s.line, "undefined signal '" + a + "'" );
        fanin.push_back( *id );
      }
      ntk.set_fanin( *ntk.find( s.name ), std::move( fanin ) );
    }
    else if ( s.what == bench_statement::kind::output )
    {
      auto const id = ntk.find( s.name );
      if ( !id )
        throw parse_error( s.line, "undefined signal '" + s.name + "'" );
      if ( !outputs.insert( s.name ).second )
        throw parse_error( s.line, "duplicate OUTPUT(" + s.name + ")" );
      ntk.add_output( *id, s.name );
    }
  }

  topological_order( ntk ); /* throws cycle_error */
  return ntk;
}

inline netlist read_bench_file( std::string const& path )
{
  std::ifstream in( path );
  if ( !in )
    throw mimic_error( "cannot open '" + path + "'" );
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_bench( ss.str() );
}

/*! \brief Serializes a netlist to `.bench` text.
 *
 * Input nodes are printed under their port names. An output port whose
 * name differs from its driver is emitted through a BUF line.
 */
inline std::string write_bench( netlist const& ntk )
{
  std::vector<std::string> printed( ntk.size() );
  for ( node_id v = 0; v < ntk.size(); ++v )
    printed[v] = ntk[v].name;
  for ( auto const& p : ntk.pis() )
    printed[p.node] = p.name;

  std::ostringstream os;
  for ( auto const& p : ntk.pis() )
    os << "INPUT(" << p.name << ")\n";
  std::vector<std::pair<std::string, node_id>> buffered;
  for ( auto const& p : ntk.pos() )
  {
    os << "OUTPUT(" << p.name << ")\n";
    if ( p.name != printed[p.node] )
      buffered.emplace_back( p.name, p.node );
  }
  if ( !ntk.pis().empty() || !ntk.pos().empty() )
    os << "\n";
  for ( auto v : topological_order( ntk ) )
  {
    auto const& nd = ntk[v];
    if ( nd.type == gate_type::input )
      continue;
    os << printed[v] << " = " << to_string( nd.type ) << "(";
    for ( std::size_t i = 0; i < nd.fanin.size(); ++i )
      os << ( i ? ", " : "" ) << printed[nd.fanin[i]];
    os << ")\n";
  }
  for ( auto const& [name, driver] : buffered )
    os << name << " = BUF(" << printed[driver] << ")\n";
  return os.str();
}

} // namespace mimic
