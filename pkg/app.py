import streamlit as st

from src.views.alerts import render_alerts, render_evaluation

st.set_page_config(page_title="provfusion", layout="wide")
st.sidebar.title("provfusion")
PAGES = {"Alerts": render_alerts, "Evaluation": render_evaluation}
PAGES[st.sidebar.selectbox("Pages", list(PAGES.keys()))]()
