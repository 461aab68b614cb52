/*!
  \file deploy.hpp
  \brief Covert-cell deployment from a node mapping

  Every node of the appearance netlist A becomes one cell. A cell matched to
  a functional node f computes f when its apparent type can hide f; its
  true inputs are the cells realizing the predecessors of f, and apparent
  inputs not among them stay as dummies. F predecessors missing from the
  apparent fan-in are wired in both views. Unmatched A cells become decoys
  whose outputs feed only dummy positions. F nodes without a usable
  partner are added as plain exposed cells named `F_<name>`.
*/

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "covert.hpp"
#include "matcher.hpp"
#include "netlist.hpp"

namespace mimic
{

/*! \brief True function of an A gate left without a functional partner. */
inline gate_spec decoy_function( gate_spec const& apparent )
{
  switch ( apparent.type )
  {
  case gate_type::buf:
  case gate_type::not_:
    return { gate_type::const0, {} };
  case gate_type::nand:
  case gate_type::nor:
    return { gate_type::not_, { apparent.inputs.front() } };
  case gate_type::and_:
  case gate_type::or_:
  case gate_type::xor_:
  case gate_type::xnor:
    return { gate_type::buf, { apparent.inputs.front() } };
  default:
    return apparent;
  }
}

namespace detail
{

inline std::string unique_name( std::string base, std::unordered_set<std::string>& taken )
{
  auto name = base;
  for ( uint32_t i = 1; taken.count( name ); ++i )
    name = base + "_" + std::to_string( i );
  taken.insert( name );
  return name;
}

} // namespace detail

/*! \brief Builds the camouflaged netlist realizing F under A's structure.
 *
 * The function view is equivalent to F: every F node is realized by exactly
 * one cell, either a matched A cell or an exposed plain cell.
 */
inline camouflaged_netlist deploy_covert( netlist const& ga, netlist const& gf, node_mapping const& m )
{
  auto const map = m.as_map( ga.size(), gf.size() );

  std::unordered_set<std::string> taken;
  for ( auto const& nd : ga.nodes() )
    taken.insert( nd.name );

  std::vector<gate_spec> app( ga.size() );
  for ( node_id a = 0; a < ga.size(); ++a )
  {
    app[a].type = ga[a].type;
    for ( auto p : ga[a].fanin )
      app[a].inputs.push_back( ga[p].name );
  }
  std::vector<std::optional<gate_spec>> truth( ga.size() );

  /* cell id realizing each F node */
  std::vector<std::string> real( gf.size() );
  std::vector<covert_cell> exposed;

  for ( auto f : topological_order( gf ) )
  {
    auto const& fn = gf[f];
    if ( fn.type == gate_type::input )
    {
      if ( map.has_f( f ) && ga[map.a_of( f )].type == gate_type::input )
      {
        auto const a = map.a_of( f );
        real[f] = ga[a].name;
        truth[a] = app[a];
      }
      else
      {
        real[f] = detail::unique_name( "F_" + fn.name, taken );
        exposed.push_back( identity_cell( real[f], { gate_type::input, {} }, true ) );
      }
      continue;
    }

    gate_spec t{ fn.type, {} };
    for ( auto p : fn.fanin )
      t.inputs.push_back( real[p] );

    if ( map.has_f( f ) )
    {
      auto const a = map.a_of( f );
      auto merged = app[a];
      for ( auto const& s : t.inputs )
      {
        if ( std::find( merged.inputs.begin(), merged.inputs.end(), s ) == merged.inputs.end() )
          merged.inputs.push_back( s );
      }
      /* a unary cell cannot grow; its single wire is redirected instead */
      if ( is_unary( merged.type ) && merged.inputs.size() > 1 && t.inputs.size() == 1 )
        merged.inputs = t.inputs;
      bool const has_dummy = !dummy_positions( merged, t ).empty();
      if ( covert_pair_allowed( merged.type, merged.inputs.size(), t.type, t.inputs.size(), has_dummy ) )
      {
        app[a] = std::move( merged );
        truth[a] = t;
        real[f] = ga[a].name;
        continue;
      }
    }
    real[f] = detail::unique_name( "F_" + fn.name, taken );
    exposed.push_back( identity_cell( real[f], t, true ) );
  }

  camouflaged_netlist c;
  for ( node_id a = 0; a < ga.size(); ++a )
  {
    auto const t = truth[a] ? *truth[a] : decoy_function( app[a] );
    c.cells.push_back( make_cell( ga[a].name, app[a], t ) );
  }
  for ( auto& e : exposed )
    c.cells.push_back( std::move( e ) );

  std::unordered_set<std::string> port_names;
  for ( auto const& p : gf.pis() )
    port_names.insert( p.name );
  std::vector<named_port> a_only;
  for ( auto const& p : ga.pis() )
  {
    if ( map.has_a( p.node ) && gf[map.f_of( p.node )].type == gate_type::input && real[map.f_of( p.node )] == ga[p.node].name )
      continue;
    auto name = p.name;
    while ( port_names.count( name ) )
      name = "A_" + name;
    port_names.insert( name );
    a_only.push_back( { ga[p.node].name, name } );
  }
  for ( auto const& p : gf.pis() )
    c.pis.push_back( { real[p.node], p.name } );
  for ( auto& p : a_only )
    c.pis.push_back( std::move( p ) );
  for ( auto const& p : gf.pos() )
    c.pos.push_back( { real[p.node], p.name } );
  return c;
}

} // namespace mimic
