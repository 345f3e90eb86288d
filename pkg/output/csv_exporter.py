"""CSV export functionality"""
import csv
from pathlib import Path
from typing import Any, List, Sequence, Union

from objectives.losses import LossBreakdown
from synthesis.signals import FLOAT_FORMAT


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT.format(value)
    return str(value)


class CSVExporter:
    """Export tables to CSV"""

    def export_rows(self, header: Sequence[str], rows: Sequence[Sequence[Any]],
                    output_path: Union[str, Path]) -> str:
        """Write header plus rows; floats get 17 significant digits"""
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)

        with open(output_file, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(list(header))
            for row in rows:
                writer.writerow([_cell(v) for v in row])

        return str(output_file)

    def export_history(self, history: Sequence[LossBreakdown], output_path: Union[str, Path]) -> str:
        """epoch,recon,kl,adv,ee,total"""
        rows = [(epoch, *entry.history_values()) for epoch, entry in enumerate(history)]
        return self.export_rows(('epoch',) + LossBreakdown.HISTORY_COLUMNS, rows, output_path)

    def load_rows(self, input_path: Union[str, Path]) -> List[List[str]]:
        with open(input_path, 'r', newline='', encoding='utf-8') as f:
            return list(csv.reader(f))
