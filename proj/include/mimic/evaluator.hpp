/*!
  \file evaluator.hpp
  \brief Scoring camouflaged netlists

  PPA proxies (node count, edge count, logic depth), functional accuracy
  of the function view, deception score from attacker F1 values,
  structural fidelity to the appearance circuit, and an exhaustive
  key-enumeration de-camouflage check for small cell counts.
*/

#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covert.hpp"
#include "errors.hpp"
#include "levelize.hpp"
#include "netlist.hpp"
#include "simulate.hpp"

namespace mimic
{

/*! \brief Nodes count PIs and gates (outputs are markers), edges count gate fan-ins, depth is the deepest levelization layer. */
struct circuit_size
{
  uint64_t nodes{ 0 };
  uint64_t edges{ 0 };
  uint32_t depth{ 0 };

  bool operator==( circuit_size const& ) const = default;
};

inline circuit_size measure( netlist const& ntk )
{
  circuit_size s;
  s.nodes = ntk.size();
  for ( auto const& nd : ntk.nodes() )
    s.edges += nd.fanin.size();
  s.depth = levelize( ntk ).depth();
  return s;
}

struct overhead_report
{
  circuit_size camo;
  circuit_size reference;
  double area_ratio{ 1.0 };
  double power_ratio{ 1.0 };
  double delay_ratio{ 1.0 };
};

/*! \brief Ratios of a fabricated netlist over a reference.
 *
 * A reference without gates has depth 0: the delay ratio is then 1 when
 * the fabricated netlist is also gate-free and infinite otherwise.
 */
inline overhead_report overheads( netlist const& fabricated, netlist const& reference )
{
  if ( reference.empty() )
    throw mimic_error( "overheads: reference netlist has no nodes" );
  overhead_report r;
  r.camo = measure( fabricated );
  r.reference = measure( reference );
  r.area_ratio = static_cast<double>( r.camo.nodes ) / static_cast<double>( r.reference.nodes );
  r.power_ratio = r.reference.edges ? static_cast<double>( r.camo.edges ) / static_cast<double>( r.reference.edges )
                                    : ( r.camo.edges ? std::numeric_limits<double>::infinity() : 1.0 );
  r.delay_ratio = r.reference.depth ? static_cast<double>( r.camo.depth ) / static_cast<double>( r.reference.depth )
                                    : ( r.camo.depth ? std::numeric_limits<double>::infinity() : 1.0 );
  return r;
}

/*! \brief Overheads of the appearance view, which is what gets fabricated (dummy inputs included). */
inline overhead_report overheads( camouflaged_netlist const& camo, netlist const& reference )
{
  return overheads( appearance_view( camo ), reference );
}

struct deception_result
{
  double score{ 0.0 };
  /*! \brief False when f1_expose is 0; `score` then holds the sentinel. */
  bool finite{ true };
  std::string note;
};

/*! \brief (f1_mimicry - f1_expose) / f1_expose.
 *
 * f1_expose = 0 gives +infinity (or 0 when f1_mimicry is also 0) with
 * `finite` cleared. Values outside [0, 1] are rejected.
 */
inline deception_result deception_score( double f1_expose, double f1_mimicry )
{
  for ( double v : { f1_expose, f1_mimicry } )
  {
    if ( !( v >= 0.0 && v <= 1.0 ) )
      throw mimic_error( "deception score: F1 values must lie in [0, 1]" );
  }
  deception_result r;
  if ( f1_expose == 0.0 )
  {
    r.finite = false;
    r.score = f1_mimicry > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.note = f1_mimicry > 0.0 ? "f1_expose is 0: the attacker never identifies the function; score unbounded"
                              : "f1_expose and f1_mimicry are both 0: score undefined, reported as 0";
    return r;
  }
  r.score = ( f1_mimicry - f1_expose ) / f1_expose;
  return r;
}

struct f1_row
{
  std::string name;
  double f1_expose{ 0.0 };
  double f1_mimicry{ 0.0 };
  /*! \brief Score printed alongside the F1 values, if the file has one. */
  std::optional<double> reported_score;
};

/*! \brief Reads `{rows: [{name, f1_expose, f1_mimicry[, reported_score]}]}`. */
inline std::vector<f1_row> f1_rows_from_json( nlohmann::json const& j )
{
  std::vector<f1_row> rows;
  try
  {
    for ( auto const& r : j.at( "rows" ) )
    {
      f1_row x;
      x.name = r.at( "name" ).get<std::string>();
      x.f1_expose = r.at( "f1_expose" ).get<double>();
      x.f1_mimicry = r.at( "f1_mimicry" ).get<double>();
      if ( r.contains( "reported_score" ) )
        x.reported_score = r.at( "reported_score" ).get<double>();
      rows.push_back( std::move( x ) );
    }
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw mimic_error( std::string( "F1 file: " ) + e.what() );
  }
  return rows;
}

/*! \brief Digits after the decimal point in the shortest form of `v` (at most 6). */
inline int printed_decimals( double v )
{
  for ( int d = 0; d <= 6; ++d )
  {
    auto const scale = std::pow( 10.0, d );
    if ( std::abs( std::round( v * scale ) - v * scale ) < 1e-6 )
      return d;
  }
  return 6;
}

struct score_check
{
  f1_row row;
  deception_result computed;
  /*! \brief Within 0.01 of the reported score, or equal to it once rounded to the reported precision. */
  bool matches{ true };
};

inline std::vector<score_check> check_scores( std::vector<f1_row> const& rows )
{
  std::vector<score_check> out;
  for ( auto const& r : rows )
  {
    score_check c{ r, deception_score( r.f1_expose, r.f1_mimicry ), true };
    if ( r.reported_score )
    {
      auto const rep = *r.reported_score;
      auto const scale = std::pow( 10.0, printed_decimals( rep ) );
      c.matches = c.computed.finite &&
                  ( std::abs( c.computed.score - rep ) <= 0.01 + 1e-9 || std::abs( std::round( c.computed.score * scale ) / scale - rep ) < 1e-9 );
    }
    out.push_back( std::move( c ) );
  }
  return out;
}

/*! \brief Agreement of the function view with `reference`, per PO bit, ports matched by name.
 *
 * Exhaustive up to 20 reference inputs, otherwise `sample_n` seeded
 * vectors. Camouflaged inputs the reference lacks are held at 0.
 */
inline agreement_result functional_accuracy( camouflaged_netlist const& camo, netlist const& reference, uint64_t sample_n = 10000, uint64_t seed = 1 )
{
  return agreement( function_view( camo ), reference, port_alignment::by_name, sample_n, seed );
}

/*! \brief 1 - (node-type multiset difference + edge symmetric difference) / (nodes(A) + edges(A)), floored at 0.
 *
 * Nodes are PIs and gates; an edge is a (driver name, sink name) pair.
 */
inline double appearance_fidelity( netlist const& view, netlist const& appearance )
{
  auto edges = []( netlist const& n ) {
    std::set<std::pair<std::string, std::string>> e;
    for ( auto const& nd : n.nodes() )
      for ( auto f : nd.fanin )
        e.emplace( n[f].name, nd.name );
    return e;
  };
  auto types = []( netlist const& n ) {
    std::map<gate_type, int64_t> m;
    for ( auto const& nd : n.nodes() )
      ++m[nd.type];
    return m;
  };
  auto const ea = edges( appearance ), ev = edges( view );
  auto const denom = static_cast<double>( appearance.size() + ea.size() );
  if ( denom == 0 )
    return view.empty() ? 1.0 : 0.0;
  auto ta = types( appearance ), tv = types( view );
  int64_t type_diff = 0;
  for ( auto t : all_gate_types )
    type_diff += std::abs( ( ta.count( t ) ? ta[t] : 0 ) - ( tv.count( t ) ? tv[t] : 0 ) );
  int64_t edge_diff = 0;
  for ( auto const& e : ea )
    edge_diff += !ev.count( e );
  for ( auto const& e : ev )
    edge_diff += !ea.count( e );
  return std::max( 0.0, 1.0 - static_cast<double>( type_diff + edge_diff ) / denom );
}

inline double appearance_fidelity( camouflaged_netlist const& camo, netlist const& appearance )
{
  return appearance_fidelity( appearance_view( camo ), appearance );
}

struct resilience_report
{
  /*! \brief Ids of the covert cells, one key bit each (bit i = 1 reads cell i as its true gate). */
  std::vector<std::string> key_cells;
  uint64_t key_space{ 1 };
  uint64_t consistent_keys{ 0 };
  bool resolved{ false };
  bool true_key_consistent{ false };
  /*! \brief Patterns applied per key. */
  uint64_t patterns{ 0 };
  bool exhaustive{ true };
  /*! \brief Key-times-pattern evaluations performed. */
  uint64_t evaluations{ 0 };
};

/*! \brief Netlist read with the given interpretation of each covert cell. */
inline netlist keyed_view( camouflaged_netlist const& camo, std::vector<std::string> const& key_cells, uint64_t key )
{
  std::map<std::string, bool> use_true;
  for ( std::size_t i = 0; i < key_cells.size(); ++i )
    use_true[key_cells[i]] = ( key >> i ) & 1u;
  return detail::build_view( camo, [&]( covert_cell const& c ) -> gate_spec const& {
    auto const it = use_true.find( c.id );
    return it == use_true.end() || it->second ? c.true_fn : c.apparent;
  } );
}

/*! \brief Brute-force key recovery against an I/O oracle.
 *
 * Every non-identity cell is a key bit choosing its apparent or true gate.
 * A key is consistent when its netlist matches the oracle on all patterns:
 * exhaustive up to 16 oracle inputs, else `sample_n` seeded vectors. More
 * than `max_keys` covert cells is refused.
 */
inline resilience_report decamo_resilience( camouflaged_netlist const& camo, netlist const& oracle, uint32_t max_keys = 16, uint64_t sample_n = 10000,
                                            uint64_t seed = 1 )
{
  check_cells( camo );
  resilience_report r;
  for ( auto const& c : camo.cells )
  {
    if ( !c.is_identity() )
      r.key_cells.push_back( c.id );
  }
  if ( r.key_cells.size() > max_keys )
    throw mimic_error( "de-camouflage check: " + std::to_string( r.key_cells.size() ) + " covert cells exceed the limit of " + std::to_string( max_keys ) );
  auto const k = static_cast<uint32_t>( r.key_cells.size() );
  r.key_space = uint64_t( 1 ) << k;
  auto const true_key = r.key_space - 1;
  for ( uint64_t key = 0; key < r.key_space; ++key )
  {
    std::optional<agreement_result> a;
    try
    {
      a = agreement( keyed_view( camo, r.key_cells, key ), oracle, port_alignment::by_name, sample_n, seed, 16 );
    }
    catch ( mimic_error const& )
    {
      /* a reading whose ports or structure do not fit the oracle is inconsistent */
    }
    if ( !a )
      continue;
    r.patterns = a->patterns;
    r.exhaustive = a->exhaustive;
    r.evaluations += a->patterns;
    if ( a->agreeing_bits == a->compared_bits )
    {
      ++r.consistent_keys;
      r.true_key_consistent |= key == true_key;
    }
  }
  r.resolved = r.consistent_keys == 1;
  return r;
}

/*! \brief Makes cell `id` an identity cell of its true gate. */
inline camouflaged_netlist fix_cell( camouflaged_netlist camo, std::string const& id )
{
  for ( auto& c : camo.cells )
  {
    if ( c.id == id )
    {
      c = identity_cell( c.id, c.true_fn, c.exposed );
      return camo;
    }
  }
  throw mimic_error( "fix_cell: no cell '" + id + "'" );
}

/*! \brief Keeps the first `max_cells` covert cells (in cell order) and fixes the rest to their true gates. */
inline camouflaged_netlist limit_covert( camouflaged_netlist camo, uint32_t max_cells )
{
  uint32_t seen = 0;
  for ( auto& c : camo.cells )
  {
    if ( c.is_identity() )
      continue;
    if ( ++seen > max_cells )
      c = identity_cell( c.id, c.true_fn, c.exposed );
  }
  return camo;
}

inline nlohmann::json to_json( circuit_size const& s )
{
  return { { "nodes", s.nodes }, { "edges", s.edges }, { "depth", s.depth } };
}

inline nlohmann::json to_json( overhead_report const& r )
{
  return { { "area_ratio", r.area_ratio },   { "power_ratio", r.power_ratio }, { "delay_ratio", r.delay_ratio },
           { "camouflaged", to_json( r.camo ) }, { "reference", to_json( r.reference ) } };
}

/* non-finite numbers become null in JSON */
inline nlohmann::json json_number( double v )
{
  return std::isfinite( v ) ? nlohmann::json( v ) : nlohmann::json( nullptr );
}

inline nlohmann::json to_json( resilience_report const& r )
{
  return { { "key_cells", r.key_cells },
           { "key_space", r.key_space },
           { "consistent_keys", r.consistent_keys },
           { "resolved", r.resolved },
           { "true_key_consistent", r.true_key_consistent },
           { "patterns", r.patterns },
           { "exhaustive", r.exhaustive },
           { "evaluations", r.evaluations } };
}

inline nlohmann::json to_json( std::vector<score_check> const& checks )
{
  nlohmann::json rows = nlohmann::json::array();
  for ( auto const& c : checks )
  {
    nlohmann::json j{ { "name", c.row.name },
                      { "f1_expose", c.row.f1_expose },
                      { "f1_mimicry", c.row.f1_mimicry },
                      { "score", json_number( c.computed.score ) },
                      { "finite", c.computed.finite } };
    if ( !c.computed.note.empty() )
      j["note"] = c.computed.note;
    if ( c.row.reported_score )
    {
      j["reported_score"] = *c.row.reported_score;
      j["matches_reported"] = c.matches;
    }
    rows.push_back( std::move( j ) );
  }
  return rows;
}

} // namespace mimic
