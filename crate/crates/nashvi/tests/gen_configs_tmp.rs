use nashvi::{config, game};

#[test]
fn generate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    std::fs::write(dir.join("two_player.cfg"), config::render_game(&game::two_player_example())).unwrap();
    std::fs::write(dir.join("chain_three.cfg"), config::render_game(&game::chain_three_example())).unwrap();
    std::fs::write(dir.join("zero_reward.cfg"), config::render_game(&game::zero_reward_example())).unwrap();
}
