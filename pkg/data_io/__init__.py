# -*- coding: utf-8 -*-
"""
data_io 패키지 - 데이터 입출력
================================
CARMEN 로그 파싱, 사이클 결과 트레이스(CSV) 읽기/쓰기와 평가 지표,
우도 지도(16-bit PGM + CSV) 출력을 담당합니다.
"""
