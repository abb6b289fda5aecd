// Regenerates the bundled fixtures under data/. Run from the repo root:
//   build/make-fixtures data

#include "../tests/support/synth.hpp"

#include "blockbuild/corpus.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    using namespace blockbuild;
    const std::filesystem::path out_dir = argc > 1 ? argv[1] : "data";
    std::filesystem::create_directories(out_dir);

    // Episode corpus on the default 11x9x11 grid, small coordinates.
    synth::Spec spec;
    spec.dims = Dims{11, 9, 11};
    spec.episodes = 12;
    spec.max_turns = 2;
    spec.max_actions_per_turn = 2;
    spec.train_fraction = 0.75; // 9 train / 1 valid / 2 test with 12 episodes
    spec.valid_fraction = 0.1;
    spec.seed = 20240601;
    const std::vector<Episode> episodes = synth::make_episodes(spec);
    save_corpus(episodes, out_dir / "fixture_corpus.jsonl");
    std::cout << "wrote " << (out_dir / "fixture_corpus.jsonl").string() << " (" << episodes.size()
              << " episodes)\n";

    // 32-sentence text fixture for the overfit run.
    const std::vector<std::string> sentences =
        synth::make_sentences(32, Dims{5, 4, 5}, 20240602);
    std::ofstream mlm(out_dir / "mlm_32.txt", std::ios::binary);
    for (const std::string& s : sentences) mlm << s << "\n";
    std::cout << "wrote " << (out_dir / "mlm_32.txt").string() << " (32 sentences)\n";
    return 0;
}
