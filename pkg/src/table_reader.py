import os
import re
import logging

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.errors import EmptyInputError, InputError, NonNumericCellError, RaggedRowError

# Get logger for this module
logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

_WHITESPACE = re.compile(r'\s+')


class TableReader:
    def __init__(self, file_path=None, has_header=None, delimiter=None, sheet_name=None, skip_invalid=False):
        """
        Initialize TableReader with optional file path and parsing options.
        If the path is not provided, uses DANCO_INPUT_PATH from .env

        :param file_path: Delimited text (.csv, .txt, .dat) or Excel (.xlsx) file
        :param has_header: True/False to force, None to detect from the first row
        :param delimiter: ',' for CSV, None to detect (comma if present, else whitespace)
        :param sheet_name: Sheet to read from .xlsx input (first sheet by default)
        :param skip_invalid: Drop non-numeric rows instead of failing
        """
        self.file_path = file_path or os.getenv('DANCO_INPUT_PATH')
        self.has_header = has_header
        self.delimiter = delimiter
        self.sheet_name = sheet_name if sheet_name is not None else os.getenv('DANCO_INPUT_SHEET', 0)
        self.skip_invalid = skip_invalid
        self.header = None
        self.rejected_rows = []

    def _is_excel(self):
        return str(self.file_path).lower().endswith(('.xlsx', '.xlsm'))

    def _read_text_rows(self):
        """
        Split the file into (line_number, cells) pairs, skipping blank and '#' lines.
        """
        with open(self.file_path, 'r', encoding='utf-8-sig') as handle:
            lines = handle.read().splitlines()

        content = [(number, line.strip()) for number, line in enumerate(lines, start=1)
                   if line.strip() and not line.lstrip().startswith('#')]
        if not content:
            raise EmptyInputError(f"Input file {self.file_path} contains no data rows")

        delimiter = self.delimiter
        if delimiter is None:
            delimiter = ',' if ',' in content[0][1] else None
        rows = []
        for number, line in content:
            if delimiter is None:
                cells = _WHITESPACE.split(line)
            else:
                cells = [cell.strip() for cell in line.split(delimiter)]
            rows.append((number, cells))
        return rows

    def _read_excel_rows(self):
        frame = pd.read_excel(self.file_path, sheet_name=self.sheet_name, header=None, engine='openpyxl', dtype=str)
        frame = frame.dropna(how='all')
        if frame.empty:
            raise EmptyInputError(f"Sheet {self.sheet_name!r} of {self.file_path} contains no data rows")
        rows = []
        for position, values in frame.iterrows():
            cells = ['' if pd.isna(value) else str(value).strip() for value in values.tolist()]
            # Excel pads short rows with empty trailing cells
            while cells and cells[-1] == '':
                cells.pop()
            rows.append((int(position) + 1, cells))
        return rows

    @staticmethod
    def _numeric(cells):
        values = pd.to_numeric(pd.Series(cells, dtype=object), errors='coerce')
        return values.to_numpy(dtype=np.float64)

    def read_frame(self):
        """
        Read the table into a float DataFrame (one point per row).

        :return: pandas DataFrame
        """
        if not self.file_path:
            raise InputError("No input path given (pass one or set DANCO_INPUT_PATH)")
        if not os.path.exists(self.file_path):
            raise InputError(f"Input file not found at {self.file_path}")

        try:
            rows = self._read_excel_rows() if self._is_excel() else self._read_text_rows()
        except (InputError, OSError):
            raise
        except Exception as e:
            raise InputError(f"Error reading input table {self.file_path}: {e}")

        first_number, first_cells = rows[0]
        first_values = self._numeric(first_cells)
        header_detected = bool(np.isnan(first_values).any())
        if self.has_header or (self.has_header is None and header_detected):
            self.header = first_cells
            rows = rows[1:]
            logger.info(f"Skipping header row: {first_cells}")
        if not rows:
            raise EmptyInputError(f"Input file {self.file_path} has a header but no data rows")

        width = len(self.header) if self.header else len(rows[0][1])
        data = []
        for number, cells in rows:
            if len(cells) != width:
                raise RaggedRowError(f"Line {number} has {len(cells)} fields, expected {width}", line_number=number)
            values = self._numeric(cells)
            bad = np.flatnonzero(np.isnan(values) | ~np.isfinite(values))
            if bad.size:
                column = int(bad[0])
                if self.skip_invalid:
                    self.rejected_rows.append(number)
                    continue
                raise NonNumericCellError(
                    f"Line {number}, column {column + 1}: non-numeric value {cells[column]!r}",
                    line_number=number, column=column,
                )
            data.append(values)

        if not data:
            raise EmptyInputError(f"Input file {self.file_path} has no numeric rows")
        if self.rejected_rows:
            logger.warning(f"Rejected {len(self.rejected_rows)} non-numeric rows at lines {self.rejected_rows}")

        frame = pd.DataFrame(np.vstack(data), columns=self.header if self.header else None)
        logger.info(f"Read {frame.shape[0]} points with {frame.shape[1]} coordinates from {self.file_path}")
        return frame

    def read_matrix(self):
        """
        Read the table and return the bare float matrix.
        """
        return self.read_frame().to_numpy(dtype=np.float64)

    def read_series(self, column=0):
        """
        Read one column as a 1-D series (for delay embedding).

        :param column: Column position or header name
        """
        frame = self.read_frame()
        if isinstance(column, str):
            if column not in frame.columns:
                raise InputError(f"Column {column!r} not found; available columns: {frame.columns.tolist()}")
            return frame[column].to_numpy(dtype=np.float64)
        if not 0 <= column < frame.shape[1]:
            raise InputError(f"Column {column} out of range for a table with {frame.shape[1]} columns")
        return frame.iloc[:, column].to_numpy(dtype=np.float64)
