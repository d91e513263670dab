import hashlib

from rich.console import Console
from rich.text import Text

from fedcluster.federation.records import RoundRecord

console = Console(stderr=True)


class RoundOutput:
    def __init__(self, method: str, record: RoundRecord):
        """Console rendering of one finished round.

        Args:
            method (str): Label of the run, e.g. "FedAvg" or "Adaptive-EXP".
            record (RoundRecord): The round to render.
        """
        self.method = method
        self.record = record

    def hash_method_to_color(self):
        colors = ["green", "yellow", "blue", "magenta", "cyan", "bright_white"]
        hash_int = int(hashlib.md5(self.method.encode()).hexdigest(), 16)
        return colors[hash_int % len(colors)]

    def get_formatted_content(self) -> str:
        r = self.record
        ratio = "-" if r.reduction_ratio is None else f"{r.reduction_ratio:+.4f}"
        accuracy = "-" if r.test_accuracy is None else f"{r.test_accuracy:.4f}"
        return (
            f"round {r.round:>4}  p={r.p:<3} loss={r.loss:.4f} r={ratio} "
            f"acc={accuracy} uploads={r.cumulative_uploads} clients={r.participants}"
        )

    @property
    def formatted_header(self) -> Text:
        return Text(f"[{self.method}]", style=self.hash_method_to_color())

    def cprint(self):
        console.print(self.formatted_header, self.get_formatted_content())
