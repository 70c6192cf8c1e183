//! Build the default cosine schedule and print every derived sequence the
//! sampler and the truncation bound consume.

use fpg_ops::schedule::{build_cosine_schedule, fds_prefactor};

fn main() {
    let total = 10;
    let schedule = build_cosine_schedule(total, 0.008).unwrap();

    println!("cosine schedule, T = {total}, offset = 0.008");
    println!("  t     beta    alpha_bar      rho        w      (1-ab)/ab");
    for t in 1..=total {
        println!(
            " {t:>2}  {:.5}   {:.6}   {:.5}   {:.5}   {:>9.4}",
            schedule.beta(t),
            schedule.alpha_bar(t),
            schedule.rho(t),
            schedule.weight(t),
            fds_prefactor(&schedule, t).unwrap(),
        );
    }

    let m = 4;
    let (head, tail) = schedule.head_tail_weight_sums(m).unwrap();
    println!("\ntail M = {m}:");
    println!("  head weight sum (t > M) = {head:.5}");
    println!("  tail weight sum (t ≤ M) = {tail:.5}");
    println!("  bound factor head/tail  = {:.5}", head / tail);
    println!("  (with measured κ, the truncation error obeys η ≤ κ·head/tail)");
}
