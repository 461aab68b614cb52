/*!
  \file matcher.hpp
  \brief Greedy layer-by-layer graph matching

  Maps nodes of an appearance netlist A onto a functional netlist F one
  layer at a time. Primary inputs are paired by name (then by position);
  every deeper layer is solved as a minimum-cost assignment whose costs
  depend on the pairs fixed in the layers below.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gate.hpp"
#include "hungarian.hpp"
#include "levelize.hpp"
#include "netlist.hpp"

namespace mimic
{

/*! \brief Cost constants of the matching objective. */
struct cost_params
{
  /*! \brief Functional gate hidden in a legal appearance gate. */
  double c_hide{ 0.0 };
  /*! \brief Types that cannot hide one another. */
  double c_mismatch{ 10.0 };
  /*! \brief Per functional connection absent from the mapped appearance. */
  double w_conn{ 3.0 };
  /*! \brief Pairing with a padding row/column (leaves the node unmatched). */
  double c_dummy{ 100.0 };

  bool valid() const
  {
    return c_hide >= 0 && w_conn >= 0 && c_hide <= c_mismatch && c_mismatch < c_dummy;
  }
};

/*! \brief Whether functional kind `f` can be hidden inside appearance kind `a`. */
inline bool type_contains( gate_type a, gate_type f )
{
  switch ( a )
  {
  case gate_type::nand:
  case gate_type::nor:
    return f == gate_type::not_;
  case gate_type::and_:
  case gate_type::or_:
    return f == gate_type::buf;
  case gate_type::xor_:
  case gate_type::xnor:
    return f != gate_type::input && f != gate_type::output;
  case gate_type::buf:
  case gate_type::not_:
    return is_constant( f );
  default:
    return false;
  }
}

inline double node_cost( gate_type a, gate_type f, cost_params const& ps = {} )
{
  if ( a == f )
    return 0.0;
  return type_contains( a, f ) ? ps.c_hide : ps.c_mismatch;
}

/*! \brief Partial bijection between the nodes of A and F. */
class partial_map
{
public:
  partial_map( std::size_t size_a, std::size_t size_f ) : a_to_f_( size_a, -1 ), f_to_a_( size_f, -1 ) {}

  void bind( node_id a, node_id f )
  {
    a_to_f_[a] = f;
    f_to_a_[f] = a;
  }

  bool has_a( node_id a ) const { return a_to_f_[a] >= 0; }
  bool has_f( node_id f ) const { return f_to_a_[f] >= 0; }
  node_id f_of( node_id a ) const { return static_cast<node_id>( a_to_f_[a] ); }
  node_id a_of( node_id f ) const { return static_cast<node_id>( f_to_a_[f] ); }

private:
  std::vector<int64_t> a_to_f_;
  std::vector<int64_t> f_to_a_;
};

/*! \brief Number of distinct F-predecessors of `f` not reached from `a` through the map, times `w_conn`.
 *
 * Extra appearance predecessors are free.
 */
inline double connection_cost( netlist const& ga, node_id a, netlist const& gf, node_id f, partial_map const& prev, cost_params const& ps = {} )
{
  std::set<node_id> mapped;
  for ( auto ap : ga[a].fanin )
  {
    if ( prev.has_a( ap ) )
      mapped.insert( prev.f_of( ap ) );
  }
  std::set<node_id> const preds( gf[f].fanin.begin(), gf[f].fanin.end() );
  std::size_t missing = 0;
  for ( auto p : preds )
    missing += !mapped.count( p );
  return ps.w_conn * static_cast<double>( missing );
}

/*! \brief Square cost matrix for one layer; padding rows/columns cost `c_dummy`. */
inline cost_matrix build_cost_matrix( netlist const& ga, std::vector<node_id> const& layer_a, netlist const& gf,
                                      std::vector<node_id> const& layer_f, partial_map const& prev, cost_params const& ps = {} )
{
  auto const n = std::max( layer_a.size(), layer_f.size() );
  cost_matrix c( n, std::vector<double>( n, ps.c_dummy ) );
  for ( std::size_t i = 0; i < layer_a.size(); ++i )
  {
    for ( std::size_t j = 0; j < layer_f.size(); ++j )
    {
      auto const a = layer_a[i];
      auto const f = layer_f[j];
      c[i][j] = node_cost( ga[a].type, gf[f].type, ps ) + connection_cost( ga, a, gf, f, prev, ps );
    }
  }
  return c;
}

struct matched_pair
{
  node_id a;
  node_id f;
  uint32_t layer;
  double node_cost;
  double conn_cost;
};

struct node_mapping
{
  std::vector<matched_pair> pairs;
  /*! \brief Indices into `pairs`, one list per layer. */
  std::vector<std::vector<std::size_t>> per_layer;
  std::vector<node_id> unmatched_a;
  std::vector<node_id> unmatched_f;
  /*! \brief Matched pair costs plus `c_dummy` for every padded assignment. */
  double total_cost{ 0 };
  /*! \brief Cost matrix solved at each layer (layer 0 is empty). */
  std::vector<cost_matrix> layer_costs;

  partial_map as_map( std::size_t size_a, std::size_t size_f ) const
  {
    partial_map m( size_a, size_f );
    for ( auto const& p : pairs )
      m.bind( p.a, p.f );
    return m;
  }
};

/*! \brief Pairs primary inputs: identical port names first, then the rest by position. */
inline std::vector<std::pair<node_id, node_id>> match_pi_layer( netlist const& ga, netlist const& gf )
{
  std::vector<std::pair<node_id, node_id>> res;
  std::vector<char> used_a( ga.pis().size(), 0 ), used_f( gf.pis().size(), 0 );
  std::unordered_map<std::string, std::size_t> fname;
  for ( std::size_t j = 0; j < gf.pis().size(); ++j )
    fname.emplace( gf.pis()[j].name, j );
  for ( std::size_t i = 0; i < ga.pis().size(); ++i )
  {
    if ( auto it = fname.find( ga.pis()[i].name ); it != fname.end() )
    {
      used_a[i] = used_f[it->second] = 1;
      res.emplace_back( ga.pis()[i].node, gf.pis()[it->second].node );
    }
  }
  std::size_t j = 0;
  for ( std::size_t i = 0; i < ga.pis().size(); ++i )
  {
    if ( used_a[i] )
      continue;
    while ( j < gf.pis().size() && used_f[j] )
      ++j;
    if ( j == gf.pis().size() )
      break;
    used_a[i] = used_f[j] = 1;
    res.emplace_back( ga.pis()[i].node, gf.pis()[j].node );
  }
  /* keep F declaration order */
  std::sort( res.begin(), res.end(), [&]( auto const& x, auto const& y ) { return x.second < y.second; } );
  return res;
}

/*! \brief Greedy layer-by-layer matching of A onto F.
 *
 * Connection costs at layer k use the pairs of every layer below k.
 */
inline node_mapping match_graphs( netlist const& ga, netlist const& gf, cost_params const& ps = {} )
{
  auto const la = levelize( ga );
  auto const lf = levelize( gf );
  node_mapping m;
  partial_map prev( ga.size(), gf.size() );

  auto const num_layers = std::max( la.layers.size(), lf.layers.size() );
  m.per_layer.resize( num_layers );
  m.layer_costs.resize( num_layers );

  for ( auto const& [a, f] : match_pi_layer( ga, gf ) )
  {
    prev.bind( a, f );
    m.per_layer[0].push_back( m.pairs.size() );
    m.pairs.push_back( { a, f, 0u, node_cost( ga[a].type, gf[f].type, ps ), 0.0 } );
  }

  std::vector<node_id> const empty;
  for ( std::size_t k = 1; k < num_layers; ++k )
  {
    auto const& layer_a = k < la.layers.size() ? la.layers[k] : empty;
    auto const& layer_f = k < lf.layers.size() ? lf.layers[k] : empty;
    auto c = build_cost_matrix( ga, layer_a, gf, layer_f, prev, ps );
    auto const sol = hungarian( c );
    std::vector<std::pair<node_id, node_id>> fresh;
    for ( std::size_t i = 0; i < sol.row_to_col.size(); ++i )
    {
      auto const j = sol.row_to_col[i];
      if ( i >= layer_a.size() || j >= layer_f.size() )
      {
        m.total_cost += ps.c_dummy;
        continue;
      }
      auto const a = layer_a[i];
      auto const f = layer_f[j];
      auto const nc = node_cost( ga[a].type, gf[f].type, ps );
      m.per_layer[k].push_back( m.pairs.size() );
      m.pairs.push_back( { a, f, static_cast<uint32_t>( k ), nc, c[i][j] - nc } );
      m.total_cost += c[i][j];
      fresh.emplace_back( a, f );
    }
    for ( auto const& [a, f] : fresh )
      prev.bind( a, f );
    m.layer_costs[k] = std::move( c );
  }

  for ( node_id a = 0; a < ga.size(); ++a )
  {
    if ( !prev.has_a( a ) )
      m.unmatched_a.push_back( a );
  }
  for ( node_id f = 0; f < gf.size(); ++f )
  {
    if ( !prev.has_f( f ) )
      m.unmatched_f.push_back( f );
  }
  return m;
}

/*! \brief `{pairs:[{a,f,layer,node_cost,conn_cost}], unmatched_a, unmatched_f, total_cost}` with node names. */
inline nlohmann::json mapping_to_json( netlist const& ga, netlist const& gf, node_mapping const& m )
{
  nlohmann::json pairs = nlohmann::json::array();
  for ( auto const& p : m.pairs )
  {
    pairs.push_back( { { "a", ga[p.a].name }, { "f", gf[p.f].name }, { "layer", p.layer }, { "node_cost", p.node_cost }, { "conn_cost", p.conn_cost } } );
  }
  nlohmann::json ua = nlohmann::json::array(), uf = nlohmann::json::array();
  for ( auto a : m.unmatched_a )
    ua.push_back( ga[a].name );
  for ( auto f : m.unmatched_f )
    uf.push_back( gf[f].name );
  return { { "pairs", pairs }, { "unmatched_a", ua }, { "unmatched_f", uf }, { "total_cost", m.total_cost } };
}

/*! \brief Reads `c_hide`, `c_mismatch`, `w_conn`, `c_dummy`; absent keys keep their defaults. */
inline cost_params cost_params_from_json( nlohmann::json const& j )
{
  cost_params ps;
  ps.c_hide = j.value( "c_hide", ps.c_hide );
  ps.c_mismatch = j.value( "c_mismatch", ps.c_mismatch );
  ps.w_conn = j.value( "w_conn", ps.w_conn );
  ps.c_dummy = j.value( "c_dummy", ps.c_dummy );
  if ( !ps.valid() )
    throw mimic_error( "cost config violates 0 <= c_hide <= c_mismatch < c_dummy" );
  return ps;
}

} // namespace mimic
