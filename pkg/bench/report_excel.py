import openpyxl
from openpyxl.styles import Font, Alignment, Border, Side, PatternFill
from io import BytesIO

from bench.report import results_row


FONT_NAME = "맑은 고딕"
THIN_BORDER = Border(
    left=Side(style="thin"),
    right=Side(style="thin"),
    top=Side(style="thin"),
    bottom=Side(style="thin"),
)
YELLOW_FILL = PatternFill("solid", fgColor="FFFFFF00")
GRAY_FILL = PatternFill("solid", fgColor="FFD9D9D9")

SUMMARY_ROWS = [
    ("best_known", "Best Known"),
    ("best", "Best"),
    ("worst", "Worst"),
    ("mean", "Average"),
    ("stddev", "Std. Dev."),
    ("mape", "MAPE"),
]
RUN_HEADERS = ["Run", "Energy", "Feasible", "AE", "Cumulative MAPE", "Time (us)"]
# 시트 이름 최대 길이 (Excel 제한)
SHEET_NAME_MAX = 31


def _header_cell(ws, row, col, value):
    cell = ws.cell(row=row, column=col, value=value)
    cell.font = Font(name=FONT_NAME, size=11, bold=True)
    cell.alignment = Alignment(horizontal="center", vertical="center")
    cell.border = THIN_BORDER
    cell.fill = GRAY_FILL
    return cell


def _value_cell(ws, row, col, value, number_format=None):
    cell = ws.cell(row=row, column=col, value=value)
    cell.font = Font(name=FONT_NAME, size=11)
    cell.alignment = Alignment(horizontal="center")
    cell.border = THIN_BORDER
    if number_format:
        cell.number_format = number_format
    return cell


def generate_report_excel(reports):
    """벤치마크별 시트 1장: 요약 블록 + 실행 표"""
    if not reports:
        raise ValueError("엑셀로 만들 벤치마크 결과가 없음")
    wb = openpyxl.Workbook()
    wb.remove(wb.active)

    for report in reports:
        ws = wb.create_sheet(title=report.instance[:SHEET_NAME_MAX])
        for col, width in zip("ABCDEF", (10, 12, 11, 12, 18, 12)):
            ws.column_dimensions[col].width = width

        ws.merge_cells("A1:F1")
        title_cell = ws["A1"]
        title_cell.value = f"{report.instance} 벤치마크 결과"
        title_cell.font = Font(name=FONT_NAME, size=16, bold=True)
        title_cell.alignment = Alignment(horizontal="center", vertical="center")
        title_cell.fill = YELLOW_FILL
        ws.row_dimensions[1].height = 30

        row = results_row(report)
        for i, (key, label) in enumerate(SUMMARY_ROWS):
            r = 3 + i
            _header_cell(ws, r, 1, label)
            ws.merge_cells(start_row=r, start_column=1, end_row=r, end_column=2)
            value = row[key]
            fmt = "0.0000" if key == "mape" else "0"
            _value_cell(ws, r, 3, "-" if value is None else value, fmt)

        r = 3 + len(SUMMARY_ROWS)
        _header_cell(ws, r, 1, "Feasibility")
        ws.merge_cells(start_row=r, start_column=1, end_row=r, end_column=2)
        _value_cell(ws, r, 3, report.feasibility_rate, "0.0%")
        _header_cell(ws, r + 1, 1, "Runs")
        ws.merge_cells(start_row=r + 1, start_column=1, end_row=r + 1, end_column=2)
        _value_cell(ws, r + 1, 3, report.runs)

        start = r + 3
        for col_idx, header in enumerate(RUN_HEADERS, 1):
            _header_cell(ws, start, col_idx, header)

        errors = iter(report.errors)
        for i, (rec, cumulative) in enumerate(zip(report.records, report.mape_curve)):
            row_idx = start + 1 + i
            _value_cell(ws, row_idx, 1, rec.run)
            _value_cell(ws, row_idx, 2, rec.energy)
            _value_cell(ws, row_idx, 3, "O" if rec.feasible else "X")
            _value_cell(ws, row_idx, 4, next(errors) if rec.feasible else None, "0.0000")
            _value_cell(ws, row_idx, 5, cumulative, "0.0000")
            _value_cell(ws, row_idx, 6, rec.time_us)

        ws.freeze_panes = ws.cell(row=start + 1, column=1)

    buf = BytesIO()
    wb.save(buf)
    buf.seek(0)
    return buf
