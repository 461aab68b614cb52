/*!
  \file netlist.hpp
  \brief Gate-level combinational netlist

  Nodes are stored in insertion order and addressed by a dense `node_id`.
  Every node also has a unique name. Primary inputs are INPUT nodes;
  primary outputs are markers on driver nodes, so a PO never adds a node.
*/

#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "gate.hpp"

namespace mimic
{

using node_id = uint32_t;

struct node
{
  std::string name;
  gate_type type{ gate_type::input };
  std::vector<node_id> fanin;
};

/*! \brief A named interface pin bound to a node. */
struct port
{
  node_id node{ 0 };
  std::string name;

  bool operator==( port const& ) const = default;
};

class netlist
{
public:
  node_id add_input( std::string const& name )
  {
    return add_input( name, name );
  }

  /*! \brief Adds an INPUT node `node_name` exposed as port `port_name`. */
  node_id add_input( std::string const& node_name, std::string const& port_name )
  {
    for ( auto const& p : pis_ )
    {
      if ( p.name == port_name )
        throw netlist_error( "duplicate primary input '" + port_name + "'" );
    }
    auto const id = add_node( node_name, gate_type::input, {} );
    pis_.push_back( { id, port_name } );
    return id;
  }

  node_id add_gate( std::string const& name, gate_type type, std::vector<node_id> fanin )
  {
    if ( type == gate_type::input || type == gate_type::output )
      throw netlist_error( "'" + name + "': " + std::string( to_string( type ) ) + " is not a gate kind" );
    if ( !arity_ok( type, fanin.size() ) )
      throw netlist_error( "'" + name + "': " + std::string( to_string( type ) ) + " cannot take " +
                           std::to_string( fanin.size() ) + " inputs" );
    for ( auto f : fanin )
    {
      if ( f >= nodes_.size() )
        throw netlist_error( "'" + name + "': fan-in id out of range" );
    }
    return add_node( name, type, std::move( fanin ) );
  }

  void add_output( node_id driver, std::string const& name )
  {
    if ( driver >= nodes_.size() )
      throw netlist_error( "output '" + name + "': driver id out of range" );
    for ( auto const& p : pos_ )
    {
      if ( p.name == name )
        throw netlist_error( "duplicate primary output '" + name + "'" );
    }
    pos_.push_back( { driver, name } );
  }

  void add_output( node_id driver )
  {
    add_output( driver, nodes_.at( driver ).name );
  }

  /*! \brief Adds a gate whose fan-in is supplied later through `set_fanin`. */
  node_id add_placeholder( std::string const& name, gate_type type )
  {
    if ( type == gate_type::input || type == gate_type::output )
      throw netlist_error( "'" + name + "': " + std::string( to_string( type ) ) + " is not a gate kind" );
    return add_node( name, type, {} );
  }

  /*! \brief Rewires a gate; used by readers that allow forward references. */
  void set_fanin( node_id n, std::vector<node_id> fanin )
  {
    auto& nd = nodes_.at( n );
    if ( !arity_ok( nd.type, fanin.size() ) )
      throw netlist_error( "'" + nd.name + "': bad arity" );
    for ( auto f : fanin )
    {
      if ( f >= nodes_.size() )
        throw netlist_error( "'" + nd.name + "': fan-in id out of range" );
    }
    nd.fanin = std::move( fanin );
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  node const& at( node_id n ) const { return nodes_.at( n ); }
  node const& operator[]( node_id n ) const { return nodes_[n]; }
  std::vector<node> const& nodes() const { return nodes_; }

  std::vector<port> const& pis() const { return pis_; }
  std::vector<port> const& pos() const { return pos_; }

  std::optional<node_id> find( std::string const& name ) const
  {
    if ( auto it = index_.find( name ); it != index_.end() )
      return it->second;
    return std::nullopt;
  }

  bool is_pi( node_id n ) const { return nodes_[n].type == gate_type::input; }

  std::size_t num_gates() const
  {
    return nodes_.size() - pis_.size();
  }

  /*! \brief Number of fan-in connections (with multiplicity). */
  std::size_t num_edges() const
  {
    std::size_t e = 0;
    for ( auto const& n : nodes_ )
      e += n.fanin.size();
    return e;
  }

  std::vector<std::vector<node_id>> fanouts() const
  {
    std::vector<std::vector<node_id>> fo( nodes_.size() );
    for ( node_id n = 0; n < nodes_.size(); ++n )
    {
      for ( auto f : nodes_[n].fanin )
        fo[f].push_back( n );
    }
    return fo;
  }

private:
  node_id add_node( std::string const& name, gate_type type, std::vector<node_id> fanin )
  {
    if ( name.empty() )
      throw netlist_error( "empty node name" );
    if ( index_.count( name ) )
      throw netlist_error( "duplicate definition of '" + name + "'" );
    auto const id = static_cast<node_id>( nodes_.size() );
    nodes_.push_back( { name, type, std::move( fanin ) } );
    index_.emplace( name, id );
    return id;
  }

  std::vector<node> nodes_;
  std::vector<port> pis_;
  std::vector<port> pos_;
  std::unordered_map<std::string, node_id> index_;
};

/*! \brief Kahn topological order; throws `cycle_error` naming a node on a cycle. */
inline std::vector<node_id> topological_order( netlist const& ntk )
{
  auto const n = ntk.size();
  std::vector<uint32_t> indeg( n, 0 );
  auto const fo = ntk.fanouts();
  for ( node_id v = 0; v < n; ++v )
    indeg[v] = static_cast<uint32_t>( ntk[v].fanin.size() );

  /* min-heap on id keeps the order independent of container iteration */
  std::priority_queue<node_id, std::vector<node_id>, std::greater<>> ready;
  for ( node_id v = 0; v < n; ++v )
  {
    if ( indeg[v] == 0 )
      ready.push( v );
  }
  std::vector<node_id> order;
  order.reserve( n );
  while ( !ready.empty() )
  {
    auto const v = ready.top();
    ready.pop();
    order.push_back( v );
    for ( auto w : fo[v] )
    {
      if ( --indeg[w] == 0 )
        ready.push( w );
    }
  }
  if ( order.size() != n )
  {
    /* walk fan-ins among the unprocessed nodes until one repeats */
    std::vector<char> done( n, 0 );
    for ( auto v : order )
      done[v] = 1;
    node_id v = 0;
    while ( done[v] )
      ++v;
    std::vector<char> seen( n, 0 );
    while ( !seen[v] )
    {
      seen[v] = 1;
      for ( auto f : ntk[v].fanin )
      {
        if ( !done[f] )
        {
          v = f;
          break;
        }
      }
    }
    throw cycle_error( ntk[v].name );
  }
  return order;
}

/*! \brief Checks all structural invariants; throws on the first violation. */
inline void validate( netlist const& ntk )
{
  std::unordered_set<std::string> po_names;
  for ( node_id v = 0; v < ntk.size(); ++v )
  {
    auto const& nd = ntk[v];
    if ( !arity_ok( nd.type, nd.fanin.size() ) )
      throw netlist_error( "'" + nd.name + "': bad arity" );
    for ( auto f : nd.fanin )
    {
      if ( f >= ntk.size() )
        throw netlist_error( "'" + nd.name + "': dangling fan-in" );
    }
  }
  std::size_t inputs = 0;
  for ( auto const& n : ntk.nodes() )
    inputs += n.type == gate_type::input;
  if ( inputs != ntk.pis().size() )
    throw netlist_error( "INPUT node without a primary-input port" );
  topological_order( ntk );
}

/*! \brief Structural equality up to node ids: same names, kinds, fan-in names and ports. */
inline bool isomorphic_by_name( netlist const& a, netlist const& b )
{
  if ( a.size() != b.size() || a.pis().size() != b.pis().size() || a.pos().size() != b.pos().size() )
    return false;
  for ( auto const& na : a.nodes() )
  {
    auto const idb = b.find( na.name );
    if ( !idb )
      return false;
    auto const& nb = b[*idb];
    if ( na.type != nb.type || na.fanin.size() != nb.fanin.size() )
      return false;
    for ( std::size_t i = 0; i < na.fanin.size(); ++i )
    {
      if ( a[na.fanin[i]].name != b[nb.fanin[i]].name )
        return false;
    }
  }
  auto same_ports = []( netlist const& x, netlist const& y, auto const& px, auto const& py ) {
    for ( std::size_t i = 0; i < px.size(); ++i )
    {
      if ( px[i].name != py[i].name || x[px[i].node].name != y[py[i].node].name )
        return false;
    }
    return true;
  };
  return same_ports( a, b, a.pis(), b.pis() ) && same_ports( a, b, a.pos(), b.pos() );
}

} // namespace mimic
