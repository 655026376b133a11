import google.generativeai as genai

# Configure Gemini
genai.configure(api_key='AIzaSyAe***********************IBsH1zn4')
model = genai.GenerativeModel('gemini-2.0-flash-001')  # Use flash model for structured extraction
