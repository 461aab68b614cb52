/*!
  \file covert.hpp
  \brief Covert cells and dual-view camouflaged netlists

  A covert cell has an apparent gate (what imaging recovers) and a true
  gate (what the silicon computes). The true fan-in is drawn from the
  apparent fan-in; apparent positions the true gate does not use are
  dummy inputs and are electrically inert.
*/

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "gate.hpp"
#include "netlist.hpp"

namespace mimic
{

struct gate_spec
{
  gate_type type{ gate_type::buf };
  std::vector<std::string> inputs;

  bool operator==( gate_spec const& ) const = default;
};

struct covert_cell
{
  std::string id;
  gate_spec apparent;
  gate_spec true_fn;
  /*! \brief Apparent fan-in positions the true gate ignores. */
  std::vector<uint32_t> dummy;
  /*! \brief Functional logic left visible (no appearance counterpart). */
  bool exposed{ false };

  bool is_identity() const { return apparent == true_fn; }

  bool operator==( covert_cell const& ) const = default;
};

/*! \brief Dummy positions implied by an (apparent, true) fan-in pair.
 *
 * A signal used `t` times by the true gate keeps its first `max(1, t)`
 * apparent occurrences live (at most all of them); all other positions
 * are dummies.
 */
inline std::vector<uint32_t> dummy_positions( gate_spec const& apparent, gate_spec const& true_fn )
{
  std::unordered_map<std::string, uint32_t> budget;
  for ( auto const& s : true_fn.inputs )
    ++budget[s];
  std::vector<uint32_t> dummy;
  std::unordered_map<std::string, uint32_t> used;
  for ( uint32_t i = 0; i < apparent.inputs.size(); ++i )
  {
    auto const& s = apparent.inputs[i];
    auto const it = budget.find( s );
    if ( it == budget.end() || used[s] >= it->second )
      dummy.push_back( i );
    else
      ++used[s];
  }
  return dummy;
}

/*! \brief Whether a cell may appear as `apparent` while computing `true_type`.
 *
 * Legal pairs: identity; fake buffer/inverter realizing a constant;
 * NAND/NOR hiding NOT; AND/OR hiding BUF; XOR/XNOR hiding any function of
 * at most two inputs; and a multi-input gate ignoring some of its inputs
 * (same kind, at least two live inputs).
 */
inline bool covert_pair_allowed( gate_type apparent, std::size_t apparent_arity, gate_type true_type, std::size_t true_arity, bool has_dummy )
{
  if ( !arity_ok( apparent, apparent_arity ) || !arity_ok( true_type, true_arity ) )
    return false;
  if ( apparent == true_type )
    return !has_dummy || ( is_nary( apparent ) && true_arity >= 2 );
  switch ( apparent )
  {
  case gate_type::buf:
  case gate_type::not_:
    return is_constant( true_type );
  case gate_type::nand:
  case gate_type::nor:
    return true_type == gate_type::not_;
  case gate_type::and_:
  case gate_type::or_:
    return true_type == gate_type::buf;
  case gate_type::xor_:
  case gate_type::xnor:
    return true_type != gate_type::input && true_type != gate_type::output && true_arity <= 2;
  default:
    return false;
  }
}

/*! \brief Builds a cell, deriving its dummy positions. */
inline covert_cell make_cell( std::string id, gate_spec apparent, gate_spec true_fn, bool exposed = false )
{
  covert_cell c{ std::move( id ), std::move( apparent ), std::move( true_fn ), {}, exposed };
  c.dummy = dummy_positions( c.apparent, c.true_fn );
  return c;
}

inline covert_cell identity_cell( std::string id, gate_spec g, bool exposed = false )
{
  auto t = g;
  return make_cell( std::move( id ), std::move( g ), std::move( t ), exposed );
}

/*! \brief Throws `netlist_error` unless the cell is a legal covert cell. */
inline void check_cell( covert_cell const& c )
{
  std::set<std::string> app( c.apparent.inputs.begin(), c.apparent.inputs.end() );
  for ( auto const& s : c.true_fn.inputs )
  {
    if ( !app.count( s ) )
      throw netlist_error( "cell '" + c.id + "': true input '" + s + "' is not an apparent input" );
  }
  if ( c.dummy != dummy_positions( c.apparent, c.true_fn ) )
    throw netlist_error( "cell '" + c.id + "': dummy positions do not match the unused apparent inputs" );
  if ( !covert_pair_allowed( c.apparent.type, c.apparent.inputs.size(), c.true_fn.type, c.true_fn.inputs.size(), !c.dummy.empty() ) )
    throw netlist_error( "cell '" + c.id + "': illegal covert pair " + std::string( to_string( c.apparent.type ) ) + "/" +
                         std::to_string( c.apparent.inputs.size() ) + " -> " + std::string( to_string( c.true_fn.type ) ) + "/" +
                         std::to_string( c.true_fn.inputs.size() ) );
}

struct named_port
{
  std::string id;
  std::string name;

  bool operator==( named_port const& ) const = default;
};

struct camouflaged_netlist
{
  std::vector<covert_cell> cells;
  std::vector<named_port> pis;
  std::vector<named_port> pos;

  std::size_t num_covert() const
  {
    return static_cast<std::size_t>( std::count_if( cells.begin(), cells.end(), []( auto const& c ) { return !c.is_identity(); } ) );
  }

  std::size_t num_exposed() const
  {
    return static_cast<std::size_t>( std::count_if( cells.begin(), cells.end(), []( auto const& c ) { return c.exposed; } ) );
  }
};

namespace detail
{

template<class Pick>
netlist build_view( camouflaged_netlist const& c, Pick&& pick )
{
  netlist ntk;
  std::unordered_map<std::string, std::string> pi_port;
  for ( auto const& p : c.pis )
  {
    if ( !pi_port.emplace( p.id, p.name ).second )
      throw netlist_error( "node '" + p.id + "' listed twice as input" );
  }
  /* inputs in declared port order, then the other cells */
  std::unordered_map<std::string, gate_type> kind;
  for ( auto const& cell : c.cells )
  {
    gate_spec const& g = pick( cell );
    if ( g.type == gate_type::input && !pi_port.count( cell.id ) )
      throw netlist_error( "INPUT cell '" + cell.id + "' is not a primary input" );
    kind.emplace( cell.id, g.type );
  }
  for ( auto const& p : c.pis )
  {
    auto const it = kind.find( p.id );
    if ( it == kind.end() || it->second != gate_type::input )
      throw netlist_error( "primary input '" + p.id + "' has no INPUT cell" );
    ntk.add_input( p.id, p.name );
  }
  for ( auto const& cell : c.cells )
  {
    gate_spec const& g = pick( cell );
    if ( g.type != gate_type::input )
      ntk.add_placeholder( cell.id, g.type );
  }
  for ( auto const& cell : c.cells )
  {
    gate_spec const& g = pick( cell );
    if ( g.type == gate_type::input )
      continue;
    std::vector<node_id> fanin;
    for ( auto const& s : g.inputs )
    {
      auto const id = ntk.find( s );
      if ( !id )
        throw netlist_error( "cell '" + cell.id + "' references unknown node '" + s + "'" );
      fanin.push_back( *id );
    }
    ntk.set_fanin( *ntk.find( cell.id ), std::move( fanin ) );
  }
  for ( auto const& p : c.pos )
  {
    auto const id = ntk.find( p.id );
    if ( !id )
      throw netlist_error( "primary output '" + p.name + "' driven by unknown node '" + p.id + "'" );
    ntk.add_output( *id, p.name );
  }
  validate( ntk );
  return ntk;
}

} // namespace detail

inline void check_cells( camouflaged_netlist const& c )
{
  for ( auto const& cell : c.cells )
    check_cell( cell );
}

/*! \brief What an imaging attacker reconstructs. */
inline netlist appearance_view( camouflaged_netlist const& c )
{
  check_cells( c );
  return detail::build_view( c, []( covert_cell const& x ) -> gate_spec const& { return x.apparent; } );
}

/*! \brief What the silicon computes; dummy inputs are dropped. */
inline netlist function_view( camouflaged_netlist const& c )
{
  check_cells( c );
  return detail::build_view( c, []( covert_cell const& x ) -> gate_spec const& { return x.true_fn; } );
}

struct camo_views
{
  netlist appearance;
  netlist function;
};

inline camo_views views( camouflaged_netlist const& c )
{
  return { appearance_view( c ), function_view( c ) };
}

/*! \brief Wraps a netlist as a camouflaged netlist of identity cells. */
inline camouflaged_netlist identity_camouflage( netlist const& ntk )
{
  camouflaged_netlist c;
  for ( auto const& nd : ntk.nodes() )
  {
    gate_spec g{ nd.type, {} };
    for ( auto f : nd.fanin )
      g.inputs.push_back( ntk[f].name );
    c.cells.push_back( identity_cell( nd.name, std::move( g ) ) );
  }
  for ( auto const& p : ntk.pis() )
    c.pis.push_back( { ntk[p.node].name, p.name } );
  for ( auto const& p : ntk.pos() )
    c.pos.push_back( { ntk[p.node].name, p.name } );
  return c;
}

} // namespace mimic
