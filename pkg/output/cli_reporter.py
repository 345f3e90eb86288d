"""CLI output reporter"""
from typing import List, Optional, Sequence

from colorama import Fore, Style, init
from tabulate import tabulate

from evaluation.metrics import EvalReport
from evaluation.reference import REFERENCE_TABLES, reference_average
from output.report_writer import format_value, report_table

init(autoreset=True)


class CLIReporter:
    """Console summaries of runs and reports"""

    def __init__(self, verbose: bool = True):
        self.verbose = verbose

    def print_banner(self):
        """Print unmix banner"""
        banner = f"""
{Fore.CYAN}╔═══════════════════════════════════════════════════════════════╗
║                                                               ║
║   {Fore.GREEN}unmix{Fore.CYAN}                                                       ║
║   {Fore.YELLOW}Blind source separation with GP priors and adversarial{Fore.CYAN}      ║
║   {Fore.YELLOW}independence (GP-AVAE, Half-GP-VAE, Half-GP-AVAE){Fore.CYAN}           ║
║                                                               ║
╚═══════════════════════════════════════════════════════════════╝{Style.RESET_ALL}
"""
        print(banner)

    def print_section(self, title: str):
        print(f"\n{Fore.CYAN}{'=' * 70}{Style.RESET_ALL}")
        print(f"{Fore.YELLOW}{title}{Style.RESET_ALL}")
        print(f"{Fore.CYAN}{'=' * 70}{Style.RESET_ALL}\n")

    def print_report(self, reports: Sequence[EvalReport], title: Optional[str] = None):
        """Matched RMSE table in the published layout"""
        if not reports:
            print(f"{Fore.YELLOW}No reports to show{Style.RESET_ALL}")
            return
        first = reports[0]
        self.print_section(title or f"Matched RMSE ({first.scenario}, seed {first.seed})")

        header, rows = report_table(reports)
        table = [[row[0]] + [format_value(v) for v in row[1:]] for row in rows]
        print(tabulate(table, headers=header, tablefmt="grid"))

        if self.verbose:
            for r in reports:
                mapping = ", ".join(f"src{k + 1}<-{'-' if s < 0 else '+'}ic{p + 1}"
                                    for k, (p, s) in enumerate(zip(r.permutation, r.signs)))
                print(f"  {Fore.GREEN}[+]{Style.RESET_ALL} {r.display_name}: {mapping}")

    def print_reference(self, key: Optional[str], reports: Sequence[EvalReport]):
        """Run averages next to the published ones"""
        if key is None or key not in REFERENCE_TABLES:
            return
        rows: List[List[str]] = []
        for r in reports:
            published = reference_average(key, r.model_variant)
            if published is None:
                continue
            rows.append([r.display_name, format_value(r.average_rmse), format_value(published)])
        if rows:
            print(f"\n{Fore.CYAN}Reference ({key}):{Style.RESET_ALL}\n")
            print(tabulate(rows, headers=["Model", "This run", "Published"], tablefmt="grid"))

    def print_summary(self, artifact_dir: str, seed_dirs: Sequence[str], elapsed: float):
        print(f"\n{Fore.GREEN}[+]{Style.RESET_ALL} Artifacts: {artifact_dir}")
        for d in seed_dirs:
            print(f"    {Fore.WHITE}{d}{Style.RESET_ALL}")
        print(f"{Fore.GREEN}[+]{Style.RESET_ALL} Duration: {elapsed:.2f}s")

    def print_error(self, message: str, exit_code: int):
        print(f"\n{Fore.RED}✗ {message} (exit code {exit_code}){Style.RESET_ALL}")
