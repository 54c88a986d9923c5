// Reverse-mode gradients of the full generator against central
// differences, on a micro model with every parameter group.

use ccqg::model::micro_gradcheck;
use ccqg::numerics::GradCheckReport;

pub fn run_example() -> ccqg::Result<GradCheckReport> {
    let report = micro_gradcheck(7, 1e-4)?;
    println!("checked {} entries; max relative error {:.2e}", report.checked, report.max_rel_error);
    if let Some((name, index)) = &report.worst {
        println!("worst entry {name}[{index}]: analytic {:.6e}, numeric {:.6e}", report.analytic, report.numeric);
    }
    Ok(report)
}

fn main() -> ccqg::Result<()> {
    run_example().map(|_| ())
}
