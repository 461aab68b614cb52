// Acceptance checks: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <mimic/bench.hpp>
#include <mimic/camo_io.hpp>
#include <mimic/deploy.hpp>
#include <mimic/evaluator.hpp>
#include <mimic/hungarian.hpp>
#include <mimic/matcher.hpp>
#include <mimic/partitioner.hpp>
#include <mimic/pieces.hpp>
#include <mimic/pipeline.hpp>
#include <mimic/random.hpp>
#include <mimic/selector.hpp>
#include <mimic/simulate.hpp>
#include <mimic/tnet.hpp>

#include "support.hpp"

using namespace mimic;
namespace fs = std::filesystem;

namespace
{

struct outcome
{
  bool pass{ true };
  std::string detail;
};

/* fails the criterion and keeps the first few reasons */
struct ledger
{
  outcome o;
  int notes{ 0 };

  void fail( std::string const& why )
  {
    o.pass = false;
    if ( notes++ < 5 )
      o.detail += ( o.detail.empty() ? "" : "; " ) + why;
  }
};

std::string fmt( char const* f, double x )
{
  char buf[64];
  std::snprintf( buf, sizeof buf, f, x );
  return buf;
}

std::vector<fs::path> corpus()
{
  std::vector<fs::path> files;
  for ( auto const& e : fs::directory_iterator( MIMIC_DATA_DIR ) )
  {
    if ( e.path().extension() == ".bench" )
      files.push_back( e.path() );
  }
  std::sort( files.begin(), files.end() );
  return files;
}

outcome deception_scores()
{
  ledger l;
  auto const checks = check_scores( f1_rows_from_json( read_json_file( test::data_path( "gnn_f1.json" ) ) ) );
  uint32_t within = 0, rounded = 0;
  std::vector<std::string> mismatches;
  for ( auto const& c : checks )
  {
    if ( !c.row.reported_score )
      continue;
    if ( !c.matches )
    {
      mismatches.push_back( c.row.name + ": computed " + fmt( "%.4g", c.computed.score ) + ", printed " + fmt( "%.4g", *c.row.reported_score ) );
      continue;
    }
    ( std::abs( c.computed.score - *c.row.reported_score ) <= 0.01 + 1e-12 ? within : rounded ) += 1;
  }
  /* the printed 10.5 contradicts its own F1 values, which give 114 */
  bool const known = mismatches.size() == 1 && mismatches[0].rfind( "c499/banyan_16 nand-array:", 0 ) == 0;
  if ( !mismatches.empty() && !known )
  {
    for ( auto const& m : mismatches )
      l.fail( m );
  }
  auto score = []( double e, double m ) { return deception_score( e, m ).score; };
  if ( std::abs( score( 0.01, 0.98 ) - 97.0 ) > 1e-9 || std::abs( score( 0.33, 0.11 ) + 0.67 ) > 0.005 ||
       std::abs( score( 0.004, 0.46 ) - 114.0 ) > 0.01 || score( 0.4, 0.4 ) != 0.0 )
    l.fail( "formula examples" );
  if ( l.o.pass )
    l.o.detail = std::to_string( checks.size() ) + " rows: " + std::to_string( within ) + " within 0.01, " + std::to_string( rounded ) +
                 " equal at printed precision; reported discrepancy: " + ( mismatches.empty() ? "none" : mismatches[0] );
  return l.o;
}

outcome matcher_soundness()
{
  ledger l;
  uint32_t pairs = 0;
  auto check = [&]( netlist const& a, netlist const& f, std::string const& what ) {
    if ( f.pis().size() > 16 )
      return;
    ++pairs;
    auto const c = deploy_covert( a, f, match_graphs( a, f ) );
    check_cells( c );
    auto const fn = function_view( c );
    /* F's truth table over F's inputs, and no dependence on appearance-only inputs */
    auto const acc = agreement( fn, f );
    if ( acc.percentage() != 100.0 || !acc.exhaustive || !equivalent_by_name( fn, f, 32 ) )
      l.fail( what );
  };
  auto const c17 = test::load( "c17.bench" ), mux = test::load( "mux_4.bench" );
  check( mux, c17, "c17 under mux_4" );
  check( c17, mux, "mux_4 under c17" );
  check( c17, c17, "c17 under c17" );
  random_source rng( 2024 );
  for ( uint32_t i = 0; i < 50; ++i )
  {
    auto const fpis = 4 + static_cast<uint32_t>( rng.below( 13 ) );
    auto const fg = 20 - fpis + static_cast<uint32_t>( rng.below( 181 - 20 + fpis ) );
    auto const apis = 4 + static_cast<uint32_t>( rng.below( 13 ) );
    auto const ag = 20 - apis + static_cast<uint32_t>( rng.below( 181 - 20 + apis ) );
    auto const f = test::random_netlist( 7000 + i, fpis, fg, "f" );
    auto const a = test::random_netlist( 9000 + i, apis, ag, "a" );
    check( a, f, "random pair " + std::to_string( i ) + " (" + std::to_string( f.size() ) + "/" + std::to_string( a.size() ) + " nodes)" );
  }
  if ( l.o.pass )
    l.o.detail = std::to_string( pairs ) + " pairs exactly equivalent";
  return l.o;
}

outcome hungarian_optimality()
{
  ledger l;
  random_source rng( 77 );
  for ( uint32_t t = 0; t < 1000; ++t )
  {
    auto const n = 1 + static_cast<uint32_t>( rng.below( 7 ) );
    cost_matrix c( n, std::vector<double>( n ) );
    for ( auto& row : c )
      for ( auto& x : row )
        x = t % 3 == 0 ? static_cast<double>( rng.below( 5 ) ) : std::round( rng.uniform() * 1000.0 ) / 10.0;
    std::vector<uint32_t> perm( n );
    std::iota( perm.begin(), perm.end(), 0u );
    double best = std::numeric_limits<double>::infinity();
    do
    {
      double s = 0;
      for ( uint32_t r = 0; r < n; ++r )
        s += c[r][perm[r]];
      best = std::min( best, s );
    } while ( std::next_permutation( perm.begin(), perm.end() ) );
    auto const a = hungarian( c );
    double s = 0;
    std::vector<bool> used( n, false );
    bool valid = a.row_to_col.size() == n;
    for ( uint32_t r = 0; valid && r < n; ++r )
    {
      valid = a.row_to_col[r] < n && !used[a.row_to_col[r]];
      if ( valid )
      {
        used[a.row_to_col[r]] = true;
        s += c[r][a.row_to_col[r]];
      }
    }
    if ( !valid || std::abs( s - best ) > 1e-9 || std::abs( a.cost - best ) > 1e-9 )
      l.fail( "trial " + std::to_string( t ) + " (" + std::to_string( n ) + "x" + std::to_string( n ) + ")" );
  }
  if ( l.o.pass )
    l.o.detail = "1000 matrices up to 7x7 optimal";
  return l.o;
}

/* minimum cut over all 2-block assignments with block sizes in [lo, hi] */
uint64_t brute_min_cut( netlist const& n, std::size_t lo, std::size_t hi )
{
  auto const sz = n.size();
  uint64_t best = std::numeric_limits<uint64_t>::max();
  for ( uint64_t mask = 1; mask + 1 < ( uint64_t( 1 ) << sz ); ++mask )
  {
    auto const ones = static_cast<std::size_t>( std::popcount( mask ) );
    if ( ones < lo || ones > hi || sz - ones < lo || sz - ones > hi )
      continue;
    uint64_t cut = 0;
    for ( node_id v = 0; v < sz; ++v )
      for ( auto f : n[v].fanin )
        cut += ( ( mask >> f ) & 1 ) != ( ( mask >> v ) & 1 );
    best = std::min( best, cut );
  }
  return best;
}

outcome partitioner_quality()
{
  ledger l;
  uint32_t moves = 0;
  for ( uint64_t seed = 0; seed < 100; ++seed )
  {
    auto const n = test::random_netlist( 4000 + seed, 3 + seed % 10, 15 + ( seed * 7 ) % 120 );
    partition_params ps;
    ps.k = 2 + seed % 5;
    ps.seed = seed;
    auto const r = partition_pipeline( n, ps );
    auto const kl = std::find_if( r.trace.begin(), r.trace.end(), []( auto const& p ) { return p.phase == "kl"; } );
    if ( kl == r.trace.end() || kl == r.trace.begin() || std::prev( kl )->cut_size < kl->cut_size )
      l.fail( "phase 2 raised the cut on graph " + std::to_string( seed ) );
    /* replay phase 3 from the phase-2 partition with full recounts */
    auto const p2 = kl_refine( n, spectral_coarse( n, ps ), ps );
    std::vector<greedy_move> log;
    auto const p3 = greedy_balance( n, p2, ps, &log );
    auto a = p2.assignment;
    for ( auto const& m : log )
    {
      auto const before = ps.w_cut * static_cast<double>( count_cut( n, a ) ) + ps.w_io * io_imbalance( count_io( n, a, ps.k ) );
      a[m.node] = m.to;
      auto const after = ps.w_cut * static_cast<double>( count_cut( n, a ) ) + ps.w_io * io_imbalance( count_io( n, a, ps.k ) );
      ++moves;
      if ( !m.forced && !( before - after > 0 ) )
        l.fail( "non-improving move on graph " + std::to_string( seed ) );
    }
    if ( a != p3.assignment || p3.assignment != r.part.assignment )
      l.fail( "phase 3 replay differs on graph " + std::to_string( seed ) );
  }
  /* bounded: blocks of 40-60% of the nodes, the regime the criterion checks; unbounded: reported only */
  uint32_t small = 0, unbounded_over = 0;
  double worst = 0, worst_unbounded = 0;
  for ( uint64_t seed = 0; small < 100 && seed < 1000; ++seed )
  {
    auto const n = test::random_netlist( 6000 + seed, 2 + seed % 3, 3 + seed % 8 );
    if ( n.size() > 12 || n.size() < 4 )
      continue;
    ++small;
    partition_params ps;
    ps.k = 2;
    ps.seed = seed;
    ps.max_size = static_cast<uint32_t>( ( 3 * n.size() + 4 ) / 5 );
    ps.min_size = static_cast<uint32_t>( n.size() - ps.max_size );
    auto const got = partition_pipeline( n, ps ).part.cut_size;
    auto const best = brute_min_cut( n, ps.min_size, ps.max_size );
    if ( static_cast<double>( got ) > 1.5 * static_cast<double>( best ) )
      l.fail( "graph " + std::to_string( seed ) + ": cut " + std::to_string( got ) + " vs optimum " + std::to_string( best ) );
    if ( best )
      worst = std::max( worst, static_cast<double>( got ) / static_cast<double>( best ) );

    partition_params free;
    free.k = 2;
    free.seed = seed;
    auto const got_free = partition_pipeline( n, free ).part.cut_size;
    auto const best_free = brute_min_cut( n, 1, n.size() );
    unbounded_over += static_cast<double>( got_free ) > 1.5 * static_cast<double>( best_free );
    if ( best_free )
      worst_unbounded = std::max( worst_unbounded, static_cast<double>( got_free ) / static_cast<double>( best_free ) );
  }
  auto const note = "; unbounded sizes (not checked): " + std::to_string( unbounded_over ) + " of " + std::to_string( small ) +
                    " graphs above 1.5x, worst " + fmt( "%.2f", worst_unbounded );
  if ( l.o.pass )
    l.o.detail = "100 graphs monotone, " + std::to_string( moves ) + " phase-3 moves improving; " + std::to_string( small ) +
                 " graphs of <=12 nodes with 40-60% size bounds, worst cut/optimum " + fmt( "%.2f", worst );
  l.o.detail += note;
  return l.o;
}

outcome recombine_lossless()
{
  ledger l;
  for ( uint64_t i = 0; i < 20; ++i )
  {
    auto const n = test::random_netlist( 8000 + i, 3 + i % 10, 10 + i * 3 );
    partition_params ps;
    ps.k = 2 + i % 2;
    ps.seed = i;
    auto const set = extract_pieces( n, partition_pipeline( n, ps ).part );
    std::vector<camouflaged_netlist> camo;
    for ( auto const& p : set.pieces )
      camo.push_back( identity_camouflage( p ) );
    auto const fn = function_view( recombine( camo, set.boundary ) );
    if ( compute_truth_table( fn ) != compute_truth_table( n ) || !isomorphic_by_name( fn, n ) )
      l.fail( "netlist " + std::to_string( i ) );
  }
  if ( l.o.pass )
    l.o.detail = "20 netlists, k in {2,3}, exhaustively equivalent";
  return l.o;
}

outcome gradient_check()
{
  ledger l;
  std::vector<net_shape> const shapes{ { 2, 1, { 2 } }, { 3, 1, { 2, 1 } }, { 2, 2, { 1, 1 } }, { 3, 2, { 2, 2 } }, { 4, 2, { 3, 2, 1 } }, { 2, 1, { 1, 1, 1 } } };
  train_config cfg;
  cfg.lambda_reg = 0.7;
  cfg.lambda_cryptic = 3.0;
  double worst = 0;
  uint64_t seed = 500;
  for ( auto const& shape : shapes )
  {
    auto net = init_net( shape, 1.5, ++seed );
    random_source rng( derive_seed( seed, 9 ) );
    for ( auto& x : net.theta1 )
      x += 1.5 * rng.normal();
    net.pin_dummies();
    net.tau = 0.5 + rng.uniform();
    std::vector<mimicry_row> rows;
    for ( uint32_t r = 0; r < 10; ++r )
    {
      mimicry_row row;
      row.p = r % 2 ? 1.0 : 0.0;
      for ( uint32_t i = 0; i < net.num_pis(); ++i )
        row.in.push_back( static_cast<double>( rng.below( 2 ) ) );
      for ( uint32_t o = 0; o < net.num_pos(); ++o )
      {
        row.target.push_back( static_cast<double>( rng.below( 2 ) ) );
        row.mask.push_back( 1 );
      }
      rows.push_back( row );
    }
    std::vector<double> g0, g1;
    total_loss( net, rows, cfg, select_mode::soft, 0, &g0, &g1 );
    for ( int set = 0; set < 2; ++set )
    {
      auto& th = set ? net.theta1 : net.theta0;
      auto const& g = set ? g1 : g0;
      for ( std::size_t i = 0; i < th.size(); ++i )
      {
        if ( !set && th[i] == selector_net::dummy_off )
          continue;
        constexpr double eps = 1e-5;
        auto const x = th[i];
        th[i] = x + eps;
        auto const up = total_loss( net, rows, cfg, select_mode::soft ).total;
        th[i] = x - eps;
        auto const down = total_loss( net, rows, cfg, select_mode::soft ).total;
        th[i] = x;
        auto const fd = ( up - down ) / ( 2 * eps );
        worst = std::max( worst, std::abs( fd - g[i] ) / std::max( { std::abs( fd ), std::abs( g[i] ), 1e-4 } ) );
      }
    }
  }
  if ( worst >= 1e-4 )
    l.fail( "worst relative error " + fmt( "%.3g", worst ) );
  else
    l.o.detail = "6 nets, worst relative error " + fmt( "%.2g", worst );
  return l.o;
}

outcome training()
{
  ledger l;
  auto const d = make_dataset( test::load( "mux_4.bench" ), test::load( "c17.bench" ) );
  std::string detail;
  for ( uint64_t seed : { 1u, 2u, 3u } )
  {
    auto const t0 = std::chrono::steady_clock::now();
    train_config cfg;
    cfg.seed = seed;
    auto const res = train( d, default_shape( d.num_pis(), d.num_pos() ), cfg );
    auto const secs = std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count();
    auto const a0 = hard_accuracy( res.net, d, 0.0 ), a1 = hard_accuracy( res.net, d, 1.0 );
    auto const viol = containment( res.net, d.ports ).fraction();
    detail += ( detail.empty() ? "" : "; " ) + std::string( "seed " ) + std::to_string( seed ) + ": p0 " + fmt( "%.1f", a0 ) + "%, p1 " + fmt( "%.1f", a1 ) +
              "%, violations " + fmt( "%.3f", viol ) + ", " + fmt( "%.1f", secs ) + " s";
    if ( a0 < 90.0 || a1 < 90.0 || viol > 0.05 || secs > 600.0 )
      l.fail( "seed " + std::to_string( seed ) );
  }
  l.o.detail = ( l.o.pass ? "" : l.o.detail + " | " ) + detail;
  return l.o;
}

outcome ppa_sanity()
{
  ledger l;
  for ( auto const& p : corpus() )
  {
    auto const n = read_bench_file( p.string() );
    auto const r = overheads( identity_camouflage( n ), n );
    if ( r.area_ratio != 1.0 || r.power_ratio != 1.0 || r.delay_ratio != 1.0 )
      l.fail( "identity on " + p.filename().string() );
  }
  for ( uint64_t i = 0; i < 20; ++i )
  {
    auto const n = test::random_netlist( 300 + i, 3 + i % 6, 10 + i * 5 );
    auto const r = overheads( identity_camouflage( n ), n );
    if ( r.area_ratio != 1.0 || r.power_ratio != 1.0 || r.delay_ratio != 1.0 )
      l.fail( "identity on random netlist " + std::to_string( i ) );
  }
  pipeline_config cfg;
  cfg.method = pipeline_method::nand_array;
  cfg.k = 1;
  cfg.out_dir = ( fs::temp_directory_path() / "mimic_acceptance_ppa" ).string();
  fs::remove_all( cfg.out_dir );
  auto const s = run_pipeline( test::data_path( "c17.bench" ), test::data_path( "mux_4.bench" ), cfg );
  if ( s.exit_code != 0 )
  {
    l.fail( "NAND-array pipeline exit " + std::to_string( s.exit_code ) + ": " + s.message );
    return l.o;
  }
  auto const& ev = s.manifest["metrics"]["evaluation"];
  auto const& h = ev["overheads"];
  auto const area = h["area_ratio"].get<double>(), power = h["power_ratio"].get<double>(), delay = h["delay_ratio"].get<double>();
  auto const cd = h["camouflaged"]["depth"].get<double>(), rd = h["reference"]["depth"].get<double>();
  if ( !( area > 1.0 && area <= 2.0 ) )
    l.fail( "area ratio " + fmt( "%.3f", area ) );
  if ( !( power > 1.0 && power <= 2.0 ) )
    l.fail( "power ratio " + fmt( "%.3f", power ) );
  if ( delay != cd / rd )
    l.fail( "delay ratio not from layer depths" );
  auto const& vf = ev["overheads_vs_function"];
  auto const text = "identity (1,1,1) on corpus and 20 random netlists; NAND array c17/mux_4 (accuracy " + fmt( "%.1f", s.accuracy ) + "%) vs " +
                    ev["overheads_baseline"].get<std::string>() + ": area " + fmt( "%.2f", area ) + ", power " + fmt( "%.2f", power ) + ", delay " +
                    fmt( "%.2f", delay ) + "; vs function: area " + fmt( "%.2f", vf["area_ratio"].get<double>() ) + ", power " +
                    fmt( "%.2f", vf["power_ratio"].get<double>() ) + ", delay " + fmt( "%.2f", vf["delay_ratio"].get<double>() );
  l.o.detail = l.o.pass ? text : l.o.detail + " | " + text;
  return l.o;
}

outcome decamouflage()
{
  ledger l;
  auto const c17 = test::load( "c17.bench" );
  std::vector<netlist> appearances{ test::load( "mux_4.bench" ), c17 };
  for ( uint64_t i = 0; i < 4; ++i )
    appearances.push_back( test::random_netlist( 1200 + i, 5, 12 + 4 * i, "a" ) );
  uint32_t runs = 0, max_k = 0;
  for ( std::size_t ai = 0; ai < appearances.size(); ++ai )
  {
    auto const full = deploy_covert( appearances[ai], c17, match_graphs( appearances[ai], c17 ) );
    for ( uint32_t limit = 0; limit <= 8; ++limit )
    {
      auto const camo = limit_covert( full, limit );
      auto const r = decamo_resilience( camo, c17, 16 );
      ++runs;
      auto const k = static_cast<uint32_t>( r.key_cells.size() );
      max_k = std::max( max_k, k );
      if ( k > 8 || !r.true_key_consistent || r.consistent_keys < 1 || !r.exhaustive || r.evaluations != ( uint64_t( 1 ) << k ) * 32u )
        l.fail( "appearance " + std::to_string( ai ) + ", limit " + std::to_string( limit ) );
    }
  }
  if ( l.o.pass )
    l.o.detail = std::to_string( runs ) + " camouflaged c17 variants (up to " + std::to_string( max_k ) + " key bits): true key always consistent, 2^k x 32 evaluations";
  return l.o;
}

outcome round_trip_and_determinism()
{
  ledger l;
  uint32_t files = 0;
  for ( auto const& p : corpus() )
  {
    ++files;
    auto const n = read_bench_file( p.string() );
    auto const back = parse_bench( write_bench( n ) );
    if ( !isomorphic_by_name( n, back ) || write_bench( back ) != write_bench( n ) )
      l.fail( "round trip of " + p.filename().string() );
  }
  for ( auto method : { pipeline_method::graph_match, pipeline_method::nand_array } )
  {
    std::vector<std::string> dumps;
    for ( int run = 0; run < 2; ++run )
    {
      pipeline_config cfg;
      cfg.method = method;
      cfg.k = method == pipeline_method::graph_match ? 10 : 1;
      cfg.seed = 11;
      cfg.out_dir = ( fs::temp_directory_path() / ( "mimic_acceptance_det" + std::to_string( run ) ) ).string();
      fs::remove_all( cfg.out_dir );
      auto const s = run_pipeline( test::data_path( "c17.bench" ), test::data_path( "mux_4.bench" ), cfg );
      if ( s.exit_code > 1 )
        l.fail( to_string( method ) + " pipeline failed: " + s.message );
      /* compare what was written to disk, not only the in-memory copy */
      auto const m = read_json_file( ( fs::path( cfg.out_dir ) / "manifest.json" ).string() );
      dumps.push_back( m["metrics"].dump() + m["seeds"].dump() + m["config"].dump() );
    }
    if ( dumps[0] != dumps[1] )
      l.fail( to_string( method ) + " manifests differ" );
  }
  if ( l.o.pass )
    l.o.detail = std::to_string( files ) + " corpus files round-trip; graph_match (k=10) and nand_array (k=1) manifests identical across runs";
  return l.o;
}

} // namespace

int main()
{
  struct criterion
  {
    int id;
    char const* name;
    double limit_s;
    std::function<outcome()> run;
  };
  std::vector<criterion> const all{ { 1, "deception score formula", 1.0, deception_scores },
                                    { 2, "graph-matcher soundness", 60.0, matcher_soundness },
                                    { 3, "Hungarian optimality", 10.0, hungarian_optimality },
                                    { 4, "partitioner monotonicity and quality", 60.0, partitioner_quality },
                                    { 5, "extract/recombine losslessness", 30.0, recombine_lossless },
                                    { 6, "selector gradient check", 5.0, gradient_check },
                                    { 7, "selector training c17/mux_4", 1800.0, training },
                                    { 8, "PPA proxy sanity", 0.0, ppa_sanity },
                                    { 9, "de-camouflage brute force", 10.0, decamouflage },
                                    { 10, "round trip and determinism", 0.0, round_trip_and_determinism } };
  int failed = 0;
  for ( auto const& c : all )
  {
    auto const t0 = std::chrono::steady_clock::now();
    outcome o;
    try
    {
      o = c.run();
    }
    catch ( std::exception const& e )
    {
      o = { false, std::string( "exception: " ) + e.what() };
    }
    auto const secs = std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count();
    if ( c.limit_s > 0 && secs > c.limit_s )
    {
      o.pass = false;
      o.detail += " [over time limit of " + fmt( "%.0f", c.limit_s ) + " s]";
    }
    failed += !o.pass;
    std::printf( "criterion %2d %-40s %s  (%.2f s)  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str() );
    std::fflush( stdout );
  }
  std::printf( "%d of %zu criteria passed\n", static_cast<int>( all.size() ) - failed, all.size() );
  return failed ? 1 : 0;
}
