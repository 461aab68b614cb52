/*!
  \file pieces.hpp
  \brief Splitting a partitioned netlist into standalone pieces and stitching them back

  A piece holds the nodes of one block. Nets entering the block become
  pseudo primary inputs and nets leaving it become pseudo primary outputs,
  both named after the net's driver. The boundary map remembers, per net,
  which piece drives it and which pieces read it.
*/

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "covert.hpp"
#include "errors.hpp"
#include "netlist.hpp"
#include "partitioner.hpp"

namespace mimic
{

struct boundary_net
{
  /*! \brief Port name used on both sides (the driver's node name). */
  std::string name;
  uint32_t driver_piece;
  std::vector<uint32_t> sink_pieces;

  bool operator==( boundary_net const& ) const = default;
};

struct boundary_map
{
  std::vector<boundary_net> nets;
  /*! \brief Original primary input and output port names, in order. */
  std::vector<std::string> pis;
  std::vector<std::string> pos;
  /*! \brief Pseudo-PI port names of each piece. */
  std::vector<std::vector<std::string>> pseudo_pis;
};

struct piece_set
{
  std::vector<netlist> pieces;
  boundary_map boundary;
};

/*! \brief One standalone netlist per block; blocks keep the original node order. */
inline piece_set extract_pieces( netlist const& ntk, partition const& p )
{
  piece_set r;
  auto const fo = ntk.fanouts();
  r.pieces.resize( p.k );
  r.boundary.pseudo_pis.resize( p.k );
  for ( auto const& port : ntk.pis() )
    r.boundary.pis.push_back( port.name );
  for ( auto const& port : ntk.pos() )
    r.boundary.pos.push_back( port.name );

  std::vector<std::string> pi_port( ntk.size() );
  for ( auto const& port : ntk.pis() )
    pi_port[port.node] = port.name;

  for ( uint32_t b = 0; b < p.k; ++b )
  {
    auto& piece = r.pieces[b];
    std::unordered_map<node_id, node_id> local;
    /* pseudo-PIs first, in driver order */
    std::set<node_id> outside;
    for ( node_id v = 0; v < ntk.size(); ++v )
    {
      if ( p.assignment[v] != b )
        continue;
      for ( auto f : ntk[v].fanin )
      {
        if ( p.assignment[f] != b )
          outside.insert( f );
      }
    }
    for ( auto x : outside )
    {
      local[x] = piece.add_input( ntk[x].name );
      r.boundary.pseudo_pis[b].push_back( ntk[x].name );
    }
    for ( node_id v = 0; v < ntk.size(); ++v )
    {
      if ( p.assignment[v] != b )
        continue;
      if ( ntk[v].type == gate_type::input )
      {
        local[v] = piece.add_input( ntk[v].name, pi_port[v] );
        continue;
      }
      local[v] = piece.add_placeholder( ntk[v].name, ntk[v].type );
    }
    for ( node_id v = 0; v < ntk.size(); ++v )
    {
      if ( p.assignment[v] != b || ntk[v].type == gate_type::input )
        continue;
      std::vector<node_id> fanin;
      for ( auto f : ntk[v].fanin )
        fanin.push_back( local.at( f ) );
      piece.set_fanin( local[v], std::move( fanin ) );
    }
    std::set<std::string> po_names;
    for ( auto const& port : ntk.pos() )
    {
      if ( p.assignment[port.node] == b )
      {
        piece.add_output( local[port.node], port.name );
        po_names.insert( port.name );
      }
    }
    for ( node_id v = 0; v < ntk.size(); ++v )
    {
      if ( p.assignment[v] != b )
        continue;
      std::vector<uint32_t> sinks;
      for ( auto s : fo[v] )
      {
        if ( p.assignment[s] != b )
          sinks.push_back( p.assignment[s] );
      }
      if ( sinks.empty() )
        continue;
      std::sort( sinks.begin(), sinks.end() );
      sinks.erase( std::unique( sinks.begin(), sinks.end() ), sinks.end() );
      if ( !po_names.count( ntk[v].name ) )
        piece.add_output( local[v], ntk[v].name );
      r.boundary.nets.push_back( { ntk[v].name, b, std::move( sinks ) } );
    }
  }
  return r;
}

/*! \brief Stitches camouflaged pieces back into one camouflaged netlist.
 *
 * A pseudo-PI is replaced by the cell driving the matching pseudo-PO of
 * its driver piece. Cell ids and extra input ports are prefixed with the
 * piece index when they collide. Throws when a boundary net cannot be
 * resolved or does not end in an INPUT cell.
 */
inline camouflaged_netlist recombine( std::vector<camouflaged_netlist> const& pieces, boundary_map const& bmap )
{
  auto const np = static_cast<uint32_t>( pieces.size() );

  /* sink-side pseudo-PI cells, keyed by local id, with the net they read */
  std::vector<std::unordered_map<std::string, boundary_net const*>> sink_cell( np );
  for ( auto const& net : bmap.nets )
  {
    if ( net.driver_piece >= np )
      throw mimic_error( "recombine: boundary net '" + net.name + "' names a missing piece" );
    for ( auto s : net.sink_pieces )
    {
      if ( s >= np )
        throw mimic_error( "recombine: boundary net '" + net.name + "' names a missing piece" );
      auto const it = std::find_if( pieces[s].pis.begin(), pieces[s].pis.end(), [&]( auto const& x ) { return x.name == net.name; } );
      if ( it == pieces[s].pis.end() )
        throw mimic_error( "recombine: piece " + std::to_string( s ) + " has no input '" + net.name + "'" );
      auto const cell = std::find_if( pieces[s].cells.begin(), pieces[s].cells.end(), [&]( auto const& c ) { return c.id == it->id; } );
      if ( cell == pieces[s].cells.end() || cell->apparent.type != gate_type::input || cell->true_fn.type != gate_type::input )
        throw mimic_error( "recombine: boundary input '" + net.name + "' of piece " + std::to_string( s ) + " is not an INPUT cell" );
      sink_cell[s][it->id] = &net;
    }
  }

  /* per piece: local cell id -> global id; dropped pseudo-PI cells take no name */
  std::vector<std::unordered_map<std::string, std::string>> gid( np );
  std::unordered_set<std::string> used;
  for ( uint32_t i = 0; i < np; ++i )
  {
    for ( auto const& c : pieces[i].cells )
    {
      if ( sink_cell[i].count( c.id ) )
        continue;
      auto name = c.id;
      if ( used.count( name ) )
      {
        name = "p" + std::to_string( i ) + "_" + c.id;
        for ( uint32_t s = 1; used.count( name ); ++s )
          name = "p" + std::to_string( i ) + "_" + c.id + "_" + std::to_string( s );
      }
      used.insert( name );
      gid[i][c.id] = name;
    }
  }

  auto po_driver = [&]( uint32_t piece, std::string const& port ) -> std::string const* {
    for ( auto const& po : pieces[piece].pos )
    {
      if ( po.name == port )
      {
        auto const it = gid[piece].find( po.id );
        return it == gid[piece].end() ? nullptr : &it->second;
      }
    }
    return nullptr;
  };

  std::vector<std::unordered_map<std::string, std::string>> subst( np );
  for ( uint32_t s = 0; s < np; ++s )
  {
    for ( auto const& [id, net] : sink_cell[s] )
    {
      auto const* drv = po_driver( net->driver_piece, net->name );
      if ( !drv )
        throw mimic_error( "recombine: piece " + std::to_string( net->driver_piece ) + " has no output '" + net->name + "'" );
      subst[s][id] = *drv;
    }
  }
  /* every pseudo-PI must have been resolved */
  std::set<std::string> const orig_pis( bmap.pis.begin(), bmap.pis.end() );
  for ( uint32_t i = 0; i < np && i < bmap.pseudo_pis.size(); ++i )
  {
    for ( auto const& name : bmap.pseudo_pis[i] )
    {
      auto const it = std::find_if( pieces[i].pis.begin(), pieces[i].pis.end(), [&]( auto const& x ) { return x.name == name; } );
      if ( it == pieces[i].pis.end() || !subst[i].count( it->id ) )
        throw mimic_error( "recombine: input '" + name + "' of piece " + std::to_string( i ) + " has no boundary entry" );
    }
  }

  camouflaged_netlist r;
  for ( uint32_t i = 0; i < np; ++i )
  {
    auto rename = [&]( std::string const& s ) -> std::string {
      if ( auto it = subst[i].find( s ); it != subst[i].end() )
        return it->second;
      return gid[i].at( s );
    };
    for ( auto const& c : pieces[i].cells )
    {
      if ( subst[i].count( c.id ) )
        continue;
      auto cell = c;
      cell.id = gid[i].at( c.id );
      for ( auto& s : cell.apparent.inputs )
        s = rename( s );
      for ( auto& s : cell.true_fn.inputs )
        s = rename( s );
      r.cells.push_back( std::move( cell ) );
    }
  }

  /* original ports in original order, then any extra inputs */
  std::set<std::string> port_taken, cell_taken;
  for ( auto const& name : bmap.pis )
  {
    for ( uint32_t i = 0; i < np; ++i )
    {
      auto const it = std::find_if( pieces[i].pis.begin(), pieces[i].pis.end(), [&]( auto const& x ) { return x.name == name; } );
      if ( it != pieces[i].pis.end() && !subst[i].count( it->id ) )
      {
        r.pis.push_back( { gid[i].at( it->id ), name } );
        port_taken.insert( name );
        cell_taken.insert( gid[i].at( it->id ) );
        break;
      }
    }
  }
  for ( uint32_t i = 0; i < np; ++i )
  {
    for ( auto const& pi : pieces[i].pis )
    {
      if ( subst[i].count( pi.id ) || cell_taken.count( gid[i].at( pi.id ) ) )
        continue;
      auto name = pi.name;
      if ( orig_pis.count( name ) || port_taken.count( name ) )
        name = "p" + std::to_string( i ) + "_" + name;
      while ( port_taken.count( name ) )
        name = "_" + name;
      port_taken.insert( name );
      cell_taken.insert( gid[i].at( pi.id ) );
      r.pis.push_back( { gid[i].at( pi.id ), name } );
    }
  }
  for ( auto const& name : bmap.pos )
  {
    std::string const* drv = nullptr;
    for ( uint32_t i = 0; i < np && !drv; ++i )
      drv = po_driver( i, name );
    if ( !drv )
      throw mimic_error( "recombine: no piece drives output '" + name + "'" );
    r.pos.push_back( { *drv, name } );
  }
  return r;
}

} // namespace mimic
