//! Prints the initial incidence matrix of a three-utterance dialogue.

use haucl::{build_initial_incidence, Modality};

fn main() -> haucl::Result<()> {
    let n = 3;
    let g = build_initial_incidence(n)?;
    println!("nodes={} edges={}", g.num_nodes(), g.num_edges());
    print!("{:>4}", "");
    for e in 0..g.num_edges() {
        let label = if e < 3 { ["T", "A", "V"][e].to_string() } else { format!("u{}", e - 3) };
        print!("{label:>4}");
    }
    println!();
    for (m, modality) in Modality::ALL.iter().enumerate() {
        for i in 0..n {
            let v = m * n + i;
            print!("{:>4}", format!("{}{i}", format!("{modality:?}").chars().next().unwrap()));
            for e in 0..g.num_edges() {
                print!("{:>4}", if g.contains(v, e) { "1" } else { "." });
            }
            println!();
        }
    }
    let (dv, de) = g.degrees();
    println!("node degrees {dv:?}");
    println!("edge degrees {de:?}");
    Ok(())
}
