"""JSON export functionality"""
import json
from pathlib import Path
from typing import Any, Dict, Union


class JSONExporter:
    """Export result documents to JSON"""

    def __init__(self, indent: int = 2):
        self.indent = indent

    def export(self, data: Dict[str, Any], output_path: Union[str, Path]) -> str:
        """Export document to a JSON file"""
        output_file = Path(output_path)
        output_file.parent.mkdir(parents=True, exist_ok=True)

        with open(output_file, 'w', encoding='utf-8') as f:
            f.write(self.export_string(data))
            f.write('\n')

        return str(output_file)

    def export_string(self, data: Dict[str, Any]) -> str:
        """Export document to a JSON string"""
        return json.dumps(data, indent=self.indent, ensure_ascii=False, allow_nan=False)

    def load(self, input_path: Union[str, Path]) -> Dict[str, Any]:
        """Read a document written by export()"""
        with open(input_path, 'r', encoding='utf-8') as f:
            return json.load(f)
