/*!
  \file pipeline.hpp
  \brief Partition, process and recombine

  Splits the functional circuit F and the appearance circuit A into
  pieces, pairs the pieces by size, camouflages each pair with the graph
  matcher or a trained NAND array, stitches the results back together and
  scores the outcome. Every artifact goes to one output directory next to
  a manifest of seeds, configs, timings and per-piece metrics.
*/

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "bench.hpp"
#include "camo_io.hpp"
#include "covert.hpp"
#include "deploy.hpp"
#include "errors.hpp"
#include "evaluator.hpp"
#include "matcher.hpp"
#include "netlist.hpp"
#include "partitioner.hpp"
#include "pieces.hpp"
#include "random.hpp"
#include "selector.hpp"
#include "tnet.hpp"

namespace mimic
{

inline constexpr char const* mimic_version = "1.0.0";

enum class pipeline_method
{
  graph_match,
  nand_array
};

inline std::string to_string( pipeline_method m )
{
  return m == pipeline_method::graph_match ? "graph_match" : "nand_array";
}

inline pipeline_method method_from_string( std::string const& s )
{
  if ( s == "graph_match" )
    return pipeline_method::graph_match;
  if ( s == "nand_array" )
    return pipeline_method::nand_array;
  throw mimic_error( "unknown method '" + s + "' (expected graph_match or nand_array)" );
}

struct pipeline_config
{
  pipeline_method method{ pipeline_method::graph_match };
  /*! \brief Requested pieces per circuit. */
  uint32_t k{ 10 };
  /*! \brief Each circuit gets at most size / min_piece_nodes pieces (at least 1). */
  uint32_t min_piece_nodes{ 4 };
  /*! \brief `k` and `seed` are overridden per circuit. */
  partition_params partition;
  cost_params costs;
  /*! \brief `seed` is overridden per piece. */
  train_config train;
  /*! \brief Largest piece input count enumerated exhaustively for training. */
  uint32_t truth_cap{ 16 };
  uint64_t sample_n{ 10000 };
  uint64_t seed{ 1 };
  /*! \brief Minimum functional accuracy (percent) for a successful run. */
  double accuracy_threshold{ 90.0 };
  uint32_t jobs{ 1 };
  bool resilience{ false };
  uint32_t max_keys{ 16 };
  std::string out_dir{ "mimic_out" };
};

inline nlohmann::json to_json( pipeline_config const& c )
{
  auto const& p = c.partition;
  auto const& t = c.train;
  return { { "method", to_string( c.method ) },
           { "k", c.k },
           { "min_piece_nodes", c.min_piece_nodes },
           { "partition",
             { { "w_cut", p.w_cut }, { "w_io", p.w_io }, { "min_size", p.min_size }, { "max_size", p.max_size },
               { "max_greedy_iters", p.max_greedy_iters }, { "kl_passes", p.kl_passes }, { "kmeans_restarts", p.kmeans_restarts },
               { "dense_limit", p.dense_limit } } },
           { "costs", { { "c_hide", c.costs.c_hide }, { "c_mismatch", c.costs.c_mismatch }, { "w_conn", c.costs.w_conn }, { "c_dummy", c.costs.c_dummy } } },
           { "train",
             { { "lambda_reg", t.lambda_reg }, { "lambda_cryptic", t.lambda_cryptic }, { "learning_rate", t.learning_rate }, { "epochs", t.epochs },
               { "batch_size", t.batch_size }, { "tau_start", t.tau_start }, { "tau_end", t.tau_end }, { "hardness_gamma", t.hardness_gamma },
               { "mode", t.mode == select_mode::soft ? "soft" : "gumbel" }, { "init_scale", t.init_scale }, { "restarts", t.restarts },
               { "straight_through", t.straight_through }, { "shared_coordinates", t.shared_coordinates }, { "shared_noise", t.shared_noise },
               { "cryptic_warmup", t.cryptic_warmup }, { "refine_iterations", t.refine_iterations }, { "refine_budget", t.refine_budget } } },
           { "truth_cap", c.truth_cap },
           { "sample_n", c.sample_n },
           { "seed", c.seed },
           { "accuracy_threshold", c.accuracy_threshold },
           { "resilience", c.resilience },
           { "max_keys", c.max_keys } };
}

/*! \brief Overlays the keys present in `j` on `base`; unknown keys are rejected. */
inline pipeline_config pipeline_config_from_json( nlohmann::json const& j, pipeline_config base = {} )
{
  auto check_keys = []( nlohmann::json const& obj, std::vector<std::string> const& known, std::string const& where ) {
    if ( !obj.is_object() )
      throw mimic_error( "config: '" + where + "' must be an object" );
    for ( auto const& [key, _] : obj.items() )
    {
      if ( std::find( known.begin(), known.end(), key ) == known.end() )
        throw mimic_error( "config: unknown key '" + key + "' in " + where );
    }
  };
  try
  {
    check_keys( j, { "method", "k", "min_piece_nodes", "partition", "costs", "train", "truth_cap", "sample_n", "seed", "accuracy_threshold", "jobs",
                     "resilience", "max_keys", "out_dir" },
                "config" );
    auto c = base;
    if ( j.contains( "method" ) )
      c.method = method_from_string( j.at( "method" ).get<std::string>() );
    c.k = j.value( "k", c.k );
    c.min_piece_nodes = j.value( "min_piece_nodes", c.min_piece_nodes );
    c.truth_cap = j.value( "truth_cap", c.truth_cap );
    c.sample_n = j.value( "sample_n", c.sample_n );
    c.seed = j.value( "seed", c.seed );
    c.accuracy_threshold = j.value( "accuracy_threshold", c.accuracy_threshold );
    c.jobs = j.value( "jobs", c.jobs );
    c.resilience = j.value( "resilience", c.resilience );
    c.max_keys = j.value( "max_keys", c.max_keys );
    c.out_dir = j.value( "out_dir", c.out_dir );
    if ( j.contains( "partition" ) )
    {
      auto const& p = j.at( "partition" );
      check_keys( p, { "w_cut", "w_io", "min_size", "max_size", "max_greedy_iters", "kl_passes", "kmeans_restarts", "dense_limit" }, "partition" );
      auto& q = c.partition;
      q.w_cut = p.value( "w_cut", q.w_cut );
      q.w_io = p.value( "w_io", q.w_io );
      q.min_size = p.value( "min_size", q.min_size );
      q.max_size = p.value( "max_size", q.max_size );
      q.max_greedy_iters = p.value( "max_greedy_iters", q.max_greedy_iters );
      q.kl_passes = p.value( "kl_passes", q.kl_passes );
      q.kmeans_restarts = p.value( "kmeans_restarts", q.kmeans_restarts );
      q.dense_limit = p.value( "dense_limit", q.dense_limit );
    }
    if ( j.contains( "costs" ) )
    {
      check_keys( j.at( "costs" ), { "c_hide", "c_mismatch", "w_conn", "c_dummy" }, "costs" );
      c.costs = cost_params_from_json( j.at( "costs" ) );
    }
    if ( j.contains( "train" ) )
    {
      auto const& t = j.at( "train" );
      check_keys( t, { "lambda_reg", "lambda_cryptic", "learning_rate", "epochs", "batch_size", "tau_start", "tau_end", "hardness_gamma", "mode",
                       "init_scale", "restarts", "straight_through", "shared_coordinates", "shared_noise", "cryptic_warmup", "refine_iterations",
                       "refine_budget" },
                  "train" );
      auto& u = c.train;
      u.lambda_reg = t.value( "lambda_reg", u.lambda_reg );
      u.lambda_cryptic = t.value( "lambda_cryptic", u.lambda_cryptic );
      u.learning_rate = t.value( "learning_rate", u.learning_rate );
      u.epochs = t.value( "epochs", u.epochs );
      u.batch_size = t.value( "batch_size", u.batch_size );
      u.tau_start = t.value( "tau_start", u.tau_start );
      u.tau_end = t.value( "tau_end", u.tau_end );
      u.hardness_gamma = t.value( "hardness_gamma", u.hardness_gamma );
      if ( t.contains( "mode" ) )
      {
        auto const m = t.at( "mode" ).get<std::string>();
        if ( m != "soft" && m != "gumbel" )
          throw mimic_error( "config: train mode must be soft or gumbel" );
        u.mode = m == "soft" ? select_mode::soft : select_mode::gumbel;
      }
      u.init_scale = t.value( "init_scale", u.init_scale );
      u.restarts = t.value( "restarts", u.restarts );
      u.straight_through = t.value( "straight_through", u.straight_through );
      u.shared_coordinates = t.value( "shared_coordinates", u.shared_coordinates );
      u.shared_noise = t.value( "shared_noise", u.shared_noise );
      u.cryptic_warmup = t.value( "cryptic_warmup", u.cryptic_warmup );
      u.refine_iterations = t.value( "refine_iterations", u.refine_iterations );
      u.refine_budget = t.value( "refine_budget", u.refine_budget );
      if ( !u.valid() )
        throw mimic_error( "config: invalid train section" );
    }
    if ( c.k == 0 || c.min_piece_nodes == 0 || c.jobs == 0 )
      throw mimic_error( "config: k, min_piece_nodes and jobs must be positive" );
    return c;
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw mimic_error( std::string( "config: " ) + e.what() );
  }
}

/*! \brief Partition file contents: block per node, cut, I/O counts and the phase trace. */
inline nlohmann::json partition_to_json( netlist const& ntk, partition_result const& r )
{
  auto j = nlohmann::json::object();
  j["k"] = r.part.k;
  j["nodes"] = nlohmann::json::array();
  for ( auto const& nd : ntk.nodes() )
    j["nodes"].push_back( nd.name );
  j["assignment"] = r.part.assignment;
  j["cut_size"] = r.part.cut_size;
  j["io_counts"] = nlohmann::json::array();
  for ( auto const& io : r.part.io_counts )
    j["io_counts"].push_back( { { "in", io.in }, { "out", io.out } } );
  j["phase_trace"] = nlohmann::json::array();
  for ( auto const& ph : r.trace )
    j["phase_trace"].push_back( { { "phase", ph.phase }, { "cut_size", ph.cut_size }, { "imbalance", json_number( ph.imbalance ) } } );
  j["moves"] = nlohmann::json::array();
  for ( auto const& m : r.moves )
    j["moves"].push_back( { { "node", ntk[m.node].name }, { "from", m.from }, { "to", m.to }, { "delta_cut", m.delta_cut },
                            { "delta_imbalance", json_number( m.delta_imbalance ) }, { "gain", json_number( m.gain ) }, { "forced", m.forced } } );
  return j;
}

/*! \brief Merges blocks lying on a common cycle of the block graph.
 *
 * Camouflaged pieces may wire any piece input to any piece output, so a
 * cyclic block graph would turn into a combinational loop on recombination.
 * Merged blocks are numbered by their smallest original block.
 */
inline partition acyclic_blocks( netlist const& ntk, partition const& p )
{
  auto const k = p.k;
  std::vector<std::vector<char>> reach( k, std::vector<char>( k, 0 ) );
  for ( uint32_t b = 0; b < k; ++b )
    reach[b][b] = 1;
  for ( node_id v = 0; v < ntk.size(); ++v )
  {
    for ( auto f : ntk[v].fanin )
      reach[p.assignment[f]][p.assignment[v]] = 1;
  }
  for ( uint32_t m = 0; m < k; ++m )
    for ( uint32_t i = 0; i < k; ++i )
      if ( reach[i][m] )
        for ( uint32_t j = 0; j < k; ++j )
          reach[i][j] |= reach[m][j];
  std::vector<uint32_t> label( k, k );
  uint32_t next = 0;
  for ( uint32_t i = 0; i < k; ++i )
  {
    if ( label[i] != k )
      continue;
    for ( uint32_t j = i; j < k; ++j )
    {
      if ( reach[i][j] && reach[j][i] )
        label[j] = next;
    }
    ++next;
  }
  if ( next == k )
    return p;
  auto assign = p.assignment;
  for ( auto& b : assign )
    b = label[b];
  return make_partition( ntk, std::move( assign ), next );
}

/*! \brief Partition with k clamped to [1, max(1, size / min_piece_nodes)].
 *
 * With `acyclic`, blocks on a common cycle of the block graph are merged
 * afterwards (trace entry "acyclic").
 */
inline partition_result partition_circuit( netlist const& ntk, partition_params ps, uint32_t k, uint32_t min_piece_nodes, bool acyclic = false )
{
  auto const cap = std::max<uint32_t>( 1u, static_cast<uint32_t>( ntk.size() ) / std::max( 1u, min_piece_nodes ) );
  ps.k = std::clamp<uint32_t>( k, 1u, cap );
  partition_result r;
  if ( ps.k == 1 )
  {
    r.part = make_partition( ntk, std::vector<uint32_t>( ntk.size(), 0 ), 1 );
    r.trace.push_back( { "single", r.part.cut_size, io_imbalance( r.part.io_counts ) } );
    return r;
  }
  r = partition_pipeline( ntk, ps );
  if ( acyclic )
  {
    r.part = acyclic_blocks( ntk, r.part );
    r.trace.push_back( { "acyclic", r.part.cut_size, io_imbalance( r.part.io_counts ) } );
  }
  return r;
}

enum class pair_flag
{
  none,
  /*! \brief F piece without an A counterpart: fabricated as is. */
  exposed,
  /*! \brief A piece without an F counterpart: fabricated as pure decoy logic. */
  decoy
};

inline std::string to_string( pair_flag f )
{
  switch ( f )
  {
  case pair_flag::exposed:
    return "exposed";
  case pair_flag::decoy:
    return "decoy";
  default:
    return "none";
  }
}

struct piece_pair
{
  std::optional<uint32_t> f;
  std::optional<uint32_t> a;
  pair_flag flag{ pair_flag::none };

  bool operator==( piece_pair const& ) const = default;
};

/*! \brief Pairs pieces by rank after sorting each side by node count, descending.
 *
 * Ties fall back to edge count and then to the `.bench` text, so the
 * pairing does not depend on input order. Surplus pieces are flagged.
 */
inline std::vector<piece_pair> pair_pieces( std::vector<netlist> const& f, std::vector<netlist> const& a )
{
  auto order = []( std::vector<netlist> const& ps ) {
    std::vector<std::tuple<std::size_t, std::size_t, std::string, uint32_t>> keys;
    for ( uint32_t i = 0; i < ps.size(); ++i )
      keys.emplace_back( ps[i].size(), ps[i].num_edges(), write_bench( ps[i] ), i );
    std::stable_sort( keys.begin(), keys.end(), []( auto const& x, auto const& y ) {
      if ( std::get<0>( x ) != std::get<0>( y ) )
        return std::get<0>( x ) > std::get<0>( y );
      if ( std::get<1>( x ) != std::get<1>( y ) )
        return std::get<1>( x ) > std::get<1>( y );
      return std::get<2>( x ) < std::get<2>( y );
    } );
    std::vector<uint32_t> r;
    for ( auto const& k : keys )
      r.push_back( std::get<3>( k ) );
    return r;
  };
  auto const of = order( f ), oa = order( a );
  std::vector<piece_pair> r;
  for ( std::size_t i = 0; i < std::max( of.size(), oa.size() ); ++i )
  {
    piece_pair p;
    if ( i < of.size() )
      p.f = of[i];
    if ( i < oa.size() )
      p.a = oa[i];
    if ( !p.a )
      p.flag = pair_flag::exposed;
    else if ( !p.f )
      p.flag = pair_flag::decoy;
    r.push_back( p );
  }
  return r;
}

/*! \brief Outcome of camouflaging one piece pair. */
struct piece_outcome
{
  camouflaged_netlist camo;
  uint64_t seed{ 0 };
  /*! \brief How the pair was processed: graph_match, nand_array, exposed or decoy. */
  std::string mode;
  std::string note;
  double accuracy{ 100.0 };
  bool exhaustive{ true };
  std::optional<train_result> training;
  std::optional<containment_report> containment;
  double seconds{ 0.0 };
};

/*! \brief Camouflages F piece `fp` to look like A piece `ap` (either may be absent). */
inline piece_outcome process_pair( netlist const* fp, netlist const* ap, pipeline_config const& cfg, uint64_t seed )
{
  auto const t0 = std::chrono::steady_clock::now();
  piece_outcome o;
  o.seed = seed;
  if ( !fp )
  {
    o.camo = identity_camouflage( *ap );
    o.mode = "decoy";
  }
  else if ( !ap )
  {
    o.camo = identity_camouflage( *fp );
    o.mode = "exposed";
  }
  else if ( cfg.method == pipeline_method::graph_match )
  {
    o.camo = deploy_covert( *ap, *fp, match_graphs( *ap, *fp, cfg.costs ) );
    o.mode = "graph_match";
  }
  else if ( fp->pos().empty() || ap->pos().empty() )
  {
    o.camo = identity_camouflage( *fp );
    o.mode = "exposed";
    o.note = "piece without outputs cannot be trained";
  }
  else
  {
    auto const d = make_dataset( *ap, *fp, cfg.truth_cap, cfg.sample_n, derive_seed( seed, 0 ) );
    auto tc = cfg.train;
    tc.seed = derive_seed( seed, 1 );
    auto res = train( d, default_shape( d.num_pis(), d.num_pos() ), tc );
    auto x = extract( res.net, d.ports );
    o.camo = std::move( x.camo );
    o.containment = std::move( x.report );
    o.training = std::move( res );
    o.mode = "nand_array";
  }
  if ( fp )
  {
    auto const acc = functional_accuracy( o.camo, *fp, cfg.sample_n, derive_seed( seed, 2 ) );
    o.accuracy = acc.percentage();
    o.exhaustive = acc.exhaustive;
  }
  o.seconds = std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count();
  return o;
}

struct pipeline_summary
{
  /*! \brief 0 success, 1 accuracy below threshold, 2 input error, 3 internal error. */
  int exit_code{ 0 };
  std::string failing_stage;
  std::string message;
  double accuracy{ 0.0 };
  nlohmann::json manifest;
  std::optional<camouflaged_netlist> camo;
};

/*! \brief Runs the whole flow on two `.bench` files and writes all artifacts under `cfg.out_dir`.
 *
 * Unreadable inputs return exit code 2 before anything is written. A
 * failing later stage returns 3; the manifest then names the stage and
 * the artifacts written so far stay in place. Deterministic in
 * (inputs, cfg) apart from the timing fields.
 */
inline pipeline_summary run_pipeline( std::string const& f_path, std::string const& a_path, pipeline_config const& cfg )
{
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  pipeline_summary s;

  netlist f, a;
  try
  {
    f = read_bench_file( f_path );
    a = read_bench_file( a_path );
    if ( f.pos().empty() )
      throw mimic_error( "'" + f_path + "' has no outputs" );
  }
  catch ( std::exception const& e )
  {
    s.exit_code = 2;
    s.failing_stage = "parse";
    s.message = e.what();
    return s;
  }

  fs::path const out( cfg.out_dir );
  auto& m = s.manifest;
  m["version"] = mimic_version;
  m["inputs"] = { { "function", f_path }, { "appearance", a_path } };
  m["config"] = to_json( cfg );
  m["seeds"] = nlohmann::json::object();
  m["artifacts"] = nlohmann::json::object();
  m["timings"] = nlohmann::json::object();
  m["metrics"] = nlohmann::json::object();
  auto& metrics = m["metrics"];

  auto write_manifest = [&] {
    m["exit_code"] = s.exit_code;
    m["failing_stage"] = s.failing_stage.empty() ? nlohmann::json() : nlohmann::json( s.failing_stage );
    if ( !s.message.empty() )
      m["message"] = s.message;
    write_json_file( ( out / "manifest.json" ).string(), m );
  };
  auto artifact = [&]( std::string const& key, fs::path const& rel ) {
    m["artifacts"][key] = rel.generic_string();
    return ( out / rel ).string();
  };

  std::string stage = "setup";
  try
  {
    fs::create_directories( out / "pieces" );

    stage = "partition";
    auto t = clock::now();
    auto pf = cfg.partition, pa = cfg.partition;
    pf.seed = derive_seed( cfg.seed, 1 );
    pa.seed = derive_seed( cfg.seed, 2 );
    m["seeds"]["partition_function"] = pf.seed;
    m["seeds"]["partition_appearance"] = pa.seed;
    auto const part_f = partition_circuit( f, pf, cfg.k, cfg.min_piece_nodes, true );
    auto const part_a = partition_circuit( a, pa, cfg.k, cfg.min_piece_nodes );
    write_json_file( artifact( "partition_function", "partition_function.json" ), partition_to_json( f, part_f ) );
    write_json_file( artifact( "partition_appearance", "partition_appearance.json" ), partition_to_json( a, part_a ) );
    auto const set_f = extract_pieces( f, part_f.part );
    auto const set_a = extract_pieces( a, part_a.part );
    metrics["partition"] = { { "function", { { "k", part_f.part.k }, { "cut_size", part_f.part.cut_size } } },
                             { "appearance", { { "k", part_a.part.k }, { "cut_size", part_a.part.cut_size } } } };
    m["timings"]["partition"] = std::chrono::duration<double>( clock::now() - t ).count();

    stage = "process";
    t = clock::now();
    auto const pairs = pair_pieces( set_f.pieces, set_a.pieces );
    std::vector<std::optional<piece_outcome>> outcomes( pairs.size() );
    std::vector<std::string> errors( pairs.size() );
    auto job = [&]( std::size_t i ) {
      try
      {
        auto const& pr = pairs[i];
        outcomes[i] = process_pair( pr.f ? &set_f.pieces[*pr.f] : nullptr, pr.a ? &set_a.pieces[*pr.a] : nullptr, cfg, derive_seed( cfg.seed, 100 + i ) );
      }
      catch ( std::exception const& e )
      {
        errors[i] = e.what();
      }
    };
    auto const workers = std::min<std::size_t>( std::max( 1u, cfg.jobs ), pairs.size() );
    if ( workers <= 1 )
    {
      for ( std::size_t i = 0; i < pairs.size(); ++i )
        job( i );
    }
    else
    {
      std::atomic<std::size_t> next{ 0 };
      std::vector<std::thread> pool;
      for ( std::size_t w = 0; w < workers; ++w )
        pool.emplace_back( [&] {
          for ( std::size_t i; ( i = next++ ) < pairs.size(); )
            job( i );
        } );
      for ( auto& th : pool )
        th.join();
    }
    for ( std::size_t i = 0; i < pairs.size(); ++i )
    {
      if ( !errors[i].empty() )
        throw mimic_error( "piece pair " + std::to_string( i ) + ": " + errors[i] );
    }

    metrics["pieces"] = nlohmann::json::array();
    for ( std::size_t i = 0; i < pairs.size(); ++i )
    {
      auto const& pr = pairs[i];
      auto const& o = *outcomes[i];
      auto const base = "piece_" + std::to_string( i );
      write_json_file( artifact( base, fs::path( "pieces" ) / ( base + ".camo.json" ) ), to_json( o.camo ) );
      m["seeds"][base] = o.seed;
      m["timings"][base] = o.seconds;
      nlohmann::json pj = { { "index", i },
                            { "function_piece", pr.f ? nlohmann::json( *pr.f ) : nlohmann::json() },
                            { "appearance_piece", pr.a ? nlohmann::json( *pr.a ) : nlohmann::json() },
                            { "flag", to_string( pr.flag ) },
                            { "mode", o.mode },
                            { "cells", o.camo.cells.size() },
                            { "covert_cells", std::count_if( o.camo.cells.begin(), o.camo.cells.end(), []( auto const& c ) { return c.apparent != c.true_fn; } ) } };
      if ( pr.f )
      {
        pj["function_nodes"] = set_f.pieces[*pr.f].size();
        pj["accuracy"] = json_number( o.accuracy );
        pj["exhaustive"] = o.exhaustive;
        pj["overheads"] = to_json( overheads( o.camo, set_f.pieces[*pr.f] ) );
      }
      if ( pr.a )
      {
        pj["appearance_nodes"] = set_a.pieces[*pr.a].size();
        pj["appearance_fidelity"] = json_number( appearance_fidelity( o.camo, set_a.pieces[*pr.a] ) );
      }
      if ( !o.note.empty() )
        pj["note"] = o.note;
      if ( o.training )
      {
        auto const& tr = *o.training;
        pj["training"] = { { "trace_rows", tr.trace.size() },{ "best_epoch", tr.best_epoch },         { "diverged", tr.diverged },
                           { "acc_p0", tr.refined_acc_p0 },   { "acc_p1", tr.refined_acc_p1 },         { "refined", tr.refined },
                           { "violations", o.containment->violations }, { "violation_fraction", json_number( o.containment->fraction() ) },
                           { "kept_nodes", std::count( o.containment->kept.begin(), o.containment->kept.end(), true ) } };
        std::ofstream( artifact( base + "_trace", fs::path( "pieces" ) / ( base + ".trace.csv" ) ) ) << trace_csv( tr.trace );
        write_json_file( artifact( base + "_checkpoint", fs::path( "pieces" ) / ( base + ".checkpoint.json" ) ),
                         checkpoint_to_json( tr.net, derive_seed( o.seed, 1 ), tr.best_epoch ) );
      }
      metrics["pieces"].push_back( std::move( pj ) );
    }
    m["timings"]["process"] = std::chrono::duration<double>( clock::now() - t ).count();

    stage = "recombine";
    t = clock::now();
    /* F pieces in their original order, then decoy pieces */
    std::vector<camouflaged_netlist> ordered( set_f.pieces.size() );
    for ( std::size_t i = 0; i < pairs.size(); ++i )
    {
      if ( pairs[i].f )
        ordered[*pairs[i].f] = outcomes[i]->camo;
    }
    for ( std::size_t i = 0; i < pairs.size(); ++i )
    {
      if ( !pairs[i].f )
        ordered.push_back( outcomes[i]->camo );
    }
    auto camo = recombine( ordered, set_f.boundary );
    check_cells( camo );
    write_json_file( artifact( "camo", "camo.json" ), to_json( camo ) );
    std::ofstream( artifact( "appearance_view", "appearance_view.bench" ) ) << write_bench( appearance_view( camo ) );
    std::ofstream( artifact( "function_view", "function_view.bench" ) ) << write_bench( function_view( camo ) );
    m["timings"]["recombine"] = std::chrono::duration<double>( clock::now() - t ).count();

    stage = "evaluate";
    t = clock::now();
    auto const eval_seed = derive_seed( cfg.seed, 3 );
    m["seeds"]["evaluate"] = eval_seed;
    auto const acc = functional_accuracy( camo, f, cfg.sample_n, eval_seed );
    s.accuracy = acc.percentage();
    auto const vs_f = overheads( camo, f );
    auto const vs_a = overheads( camo, a );
    bool const a_larger = a.size() > f.size();
    /* NAND arrays are scored against the larger circuit; matcher runs against F */
    bool const headline_a = cfg.method == pipeline_method::nand_array && a_larger;
    nlohmann::json report = { { "functional_accuracy", json_number( s.accuracy ) },
                              { "accuracy_exhaustive", acc.exhaustive },
                              { "patterns", acc.patterns },
                              { "appearance_fidelity", json_number( appearance_fidelity( camo, a ) ) },
                              { "cells", camo.cells.size() },
                              { "covert_cells", std::count_if( camo.cells.begin(), camo.cells.end(), []( auto const& c ) { return c.apparent != c.true_fn; } ) },
                              { "overheads", to_json( headline_a ? vs_a : vs_f ) },
                              { "overheads_baseline", headline_a ? "appearance" : "function" },
                              { "overheads_vs_function", to_json( vs_f ) },
                              { "overheads_vs_appearance", to_json( vs_a ) },
                              { "overheads_vs_larger", to_json( a_larger ? vs_a : vs_f ) } };
    if ( cfg.resilience )
    {
      auto const covert = static_cast<uint32_t>( report["covert_cells"].get<std::size_t>() );
      if ( covert <= cfg.max_keys )
        report["resilience"] = to_json( decamo_resilience( camo, f, cfg.max_keys, cfg.sample_n, eval_seed ) );
      else
        report["resilience"] = { { "refused", true }, { "covert_cells", covert }, { "max_keys", cfg.max_keys } };
    }
    write_json_file( artifact( "report", "report.json" ), report );
    metrics["evaluation"] = report;
    m["timings"]["evaluate"] = std::chrono::duration<double>( clock::now() - t ).count();

    s.camo = std::move( camo );
    s.exit_code = s.accuracy + 1e-9 >= cfg.accuracy_threshold ? 0 : 1;
    if ( s.exit_code == 1 )
      s.message = "functional accuracy below threshold";
    write_manifest();
  }
  catch ( std::exception const& e )
  {
    s.exit_code = 3;
    s.failing_stage = stage;
    s.message = e.what();
    try
    {
      write_manifest();
    }
    catch ( std::exception const& )
    {
    }
  }
  return s;
}

} // namespace mimic
