# -*- coding: utf-8 -*-
"""
sim 패키지 - 2D 월드 시뮬레이터
================================
절차적 지도 생성, LiDAR 레이캐스팅, 실제 궤적/오도메트리 생성,
시나리오 파일 해석 및 폐루프 실행을 담당합니다.
"""
