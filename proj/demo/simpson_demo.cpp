// Simpson's-paradox world end to end: the naive mean log-probability ranks texts the
// wrong way round, the locally calibrated score recovers the oracle.
//
//   loccal_demo [texts_per_source=600] [threads=1]

#include <cstdlib>
#include <iostream>
#include <string>

#include "loccal/loccal.hpp"

using namespace loccal;

int main(int argc, char** argv) {
    const std::size_t n_texts = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 600;
    const std::size_t threads = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 1;
    try {
        const SyntheticWorld w = simpson_world();
        const auto& h = w.sources[0];
        const auto& m = w.sources[1];
        std::cout << "world: 2 clusters, " << w.tokens_per_text << " tokens/text, " << n_texts << " texts/source\n";
        for (std::size_t c = 0; c < w.clusters.size(); ++c)
            std::cout << "  cluster " << c << ": weight human " << h.weights[c] << " machine " << m.weights[c]
                      << ", mean g human " << h.scores[c].mean << " machine " << m.scores[c].mean << '\n';
        std::cout << "  pooled mean g: human " << format_fixed(pooled_mean(h), 3) << ", machine "
                  << format_fixed(pooled_mean(m), 3) << "\n\n";

        const CorpusSplit split = split_by_prompt_group(generate_world(w, n_texts), {0.5, w.seed, std::nullopt});
        FitOptions f;
        f.scorers = {ScorerId::log_surprisal, ScorerId::fd_tok};
        f.threads = threads;
        f.train.seed = w.seed;
        std::cout << "fitting on " << split.train.size() << " texts...\n";
        const ModelBundle b = fit_bundle(split.train, f);

        auto auroc = [&](const auto& fn) { return auroc_of(split.test, "human", "machine", fn); };
        const double oracle = auroc([&](const TextRecord& t) { return -exact_lambda4(w, t); });
        Table t;
        t.header = {"scorer", "naive AUROC", "calibrated AUROC", "oracle AUROC"};
        for (ScorerId s : b.scorers) {
            const DetectorBundle det = b.detector(s, "machine");
            const double naive = auroc([&](const TextRecord& x) { return naive_machine_evidence(naive_score(x, s), s); });
            const double cal = auroc([&](const TextRecord& x) { return -lambda4_score(x, det); });
            t.rows.push_back({std::string(to_string(s)), format_fixed(naive, 4), format_fixed(cal, 4), format_fixed(oracle, 4)});
        }
        std::cout << '\n';
        t.write(std::cout);

        std::cout << "\nlargest k-means clusters (mean log p per source):\n";
        const ClusterReport r = cluster_report(split.test, b.features->pca, 10, w.seed);
        Table ct = cluster_table(r);
        ct.rows.erase(ct.rows.begin() + 5, ct.rows.end() - 1);
        ct.write(std::cout);
        std::cout << opposing_clusters(r, 0, 1).size() << " of 10 clusters order the sources opposite to the pooled means\n";
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    }
    return 0;
}
